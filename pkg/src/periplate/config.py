"""TOML run configuration: schema, defaults and validation.

Every validation failure names the offending field and the reason.  The
parsed object can build the discretization bundle (grid, basis, forcing,
problem) that the run modes operate on.
"""

try:
    import tomllib
except ModuleNotFoundError:  # python 3.10
    import tomli as tomllib

from .assembly import AssemblyOptions, ForcingSpec
from .basis import build_interleaved_basis, stream_pool
from .fields import PlateProfile
from .fixedpoint import FixedPointConfig, LadderLevel, PeriodicProblem
from .geometry import ReferenceSlab

RUN_MODES = ("solve", "fixpoint", "ladder", "study", "selftest")


class ConfigError(ValueError):
    def __init__(self, field, reason):
        super().__init__(f"config field '{field}': {reason}")
        self.field = field
        self.reason = reason


def _get(table, key, default=None):
    return table.get(key, default)


class SolverConfig:
    """Validated run configuration with derived discretization sizes."""

    def __init__(self, raw, path=None):
        self.raw = raw
        self.path = path

        run = raw.get("run", {})
        self.mode = _get(run, "mode", "fixpoint")
        if self.mode not in RUN_MODES:
            raise ConfigError("run.mode", f"must be one of {RUN_MODES}")
        self.out_dir = _get(run, "out_dir", "out")
        self.deterministic = bool(_get(run, "deterministic", True))
        self.seed = int(_get(run, "seed", 0))

        prob = raw.get("problem", {})
        self.T = float(_get(prob, "T", 1.0))
        if self.T <= 0:
            raise ConfigError("problem.T", "period must be positive")
        self.kappa = float(_get(prob, "kappa", 0.5))
        if not 0.0 < self.kappa < 1.0:
            raise ConfigError("problem.kappa", "must lie strictly between 0 and 1")
        self.mean = float(_get(prob, "m", 0.0))

        disc = raw.get("discretization", {})
        self.n = int(_get(disc, "n", 8))
        if self.n < 2 or self.n % 2:
            raise ConfigError("discretization.n", "basis size must be even and >= 2")
        self.nt = int(_get(disc, "Nt", 128))
        if self.nt < 2:
            raise ConfigError("discretization.Nt", "need at least 2 time steps")
        self.k_max = _get(disc, "k_max")
        self.j_max = _get(disc, "j_max")
        self.m_max = _get(disc, "m_max")
        n_half = self.n // 2
        if self.k_max is None:
            self.k_max = (n_half + 1) // 2
        if 2 * self.k_max < n_half:
            raise ConfigError(
                "discretization.k_max",
                f"plate pool 2*k_max = {2 * self.k_max} cannot host {n_half} modes",
            )
        if self.j_max is not None or self.m_max is not None:
            if self.j_max is None or self.m_max is None:
                raise ConfigError(
                    "discretization.j_max", "specify j_max and m_max together"
                )
            if len(stream_pool(self.j_max, self.m_max)) < n_half:
                raise ConfigError(
                    "discretization.j_max",
                    f"fluid pool (j_max={self.j_max}, m_max={self.m_max}) "
                    f"cannot host {n_half} modes",
                )
        nx_floor = 4 * self.k_max + 2
        self.x_nodes = int(_get(disc, "x_nodes", max(nx_floor, 16)))
        if self.x_nodes < nx_floor:
            raise ConfigError(
                "discretization.x_nodes",
                f"need at least 4*k_max + 2 = {nx_floor} for exact quartic integrals",
            )
        if self.x_nodes % 2:
            raise ConfigError("discretization.x_nodes", "must be even")
        self.z_nodes = int(_get(disc, "z_nodes", 24))
        self.panel_nodes = _get(disc, "panel_nodes")

        fp = raw.get("fixed_point", {})
        self.omega = float(_get(fp, "omega", 0.5))
        if not 0.0 < self.omega <= 1.0:
            raise ConfigError("fixed_point.omega", "damping must lie in (0, 1]")
        self.tol = float(_get(fp, "tol", 1e-9))
        if self.tol <= 0:
            raise ConfigError("fixed_point.tol", "tolerance must be positive")
        self.max_iter = int(_get(fp, "max_iter", 80))
        self.anderson = bool(_get(fp, "anderson", False))
        self.eps_cells = int(_get(fp, "eps_cells", 2))
        if self.eps_cells < 2:
            raise ConfigError("fixed_point.eps_cells", "must be >= 2 grid cells")
        if self.eps_cells > self.nt:
            raise ConfigError("fixed_point.eps_cells", "exceeds the time grid")
        self.sigma = float(_get(fp, "sigma", 0.0))
        if self.sigma < 0:
            raise ConfigError("fixed_point.sigma", "must be nonnegative")
        self.energy_ceiling = float(_get(fp, "energy_ceiling", 1e8))

        self.forcing_fluid = self._forcing_entries(raw, "fluid")
        self.forcing_plate = self._forcing_entries(raw, "plate")

        geo = raw.get("geometry", {})
        self.geometry_modes = []
        for i, entry in enumerate(geo.get("modes", [])):
            self.geometry_modes.append(self._geometry_mode(entry, i))

        lad = raw.get("ladder", {})
        self.ladder_levels = []
        for i, entry in enumerate(lad.get("levels", [])):
            try:
                self.ladder_levels.append(LadderLevel(
                    entry["n"], entry["Nt"], entry["eps_cells"], entry["sigma"]
                ))
            except KeyError as exc:
                raise ConfigError(
                    f"ladder.levels[{i}]", f"missing key {exc.args[0]!r}"
                ) from None

        study = raw.get("study", {})
        self.study_factors = [float(v) for v in study.get("factors", [1.0, 0.5, 0.25])]
        if any(f <= 0 for f in self.study_factors):
            raise ConfigError("study.factors", "amplitude factors must be positive")

    def _forcing_entries(self, raw, kind):
        entries = []
        for i, entry in enumerate(raw.get("forcing", {}).get(kind, [])):
            where = f"forcing.{kind}[{i}]"
            try:
                time_k = entry["time_k"]
                time_phase = entry["time_phase"]
                space_phase = entry["space_phase"]
                amplitude = entry["amplitude"]
            except KeyError as exc:
                raise ConfigError(where, f"missing key {exc.args[0]!r}") from None
            if int(time_k) != time_k:
                raise ConfigError(where + ".time_k", "must be an integer")
            space_k = entry.get("space_k", 0)
            if time_phase not in ("cos", "sin"):
                raise ConfigError(where + ".time_phase", "must be 'cos' or 'sin'")
            if space_phase not in ("cos", "sin", "const"):
                raise ConfigError(
                    where + ".space_phase", "must be 'cos', 'sin' or 'const'"
                )
            if kind == "fluid":
                comp = entry.get("component", 0)
                if comp not in (0, 1):
                    raise ConfigError(where + ".component", "must be 0 or 1")
                entries.append((int(time_k), time_phase, int(space_k), space_phase,
                                int(entry.get("z_power", 0)), comp, float(amplitude)))
            else:
                entries.append((int(time_k), time_phase, int(space_k), space_phase,
                                float(amplitude)))
        return entries

    def _geometry_mode(self, entry, i):
        where = f"geometry.modes[{i}]"
        for key in ("time_k", "time_phase", "space_k", "space_phase", "amplitude"):
            if key not in entry:
                raise ConfigError(where, f"missing key {key!r}")
        if entry["time_phase"] not in ("cos", "sin", "const"):
            raise ConfigError(where + ".time_phase", "must be 'cos', 'sin' or 'const'")
        if entry["space_phase"] not in ("cos", "sin"):
            raise ConfigError(where + ".space_phase", "must be 'cos' or 'sin'")
        amp = float(entry["amplitude"])
        if abs(amp) >= self.kappa:
            raise ConfigError(where + ".amplitude", "prescribed geometry exceeds kappa")
        return dict(time_k=int(entry["time_k"]), time_phase=entry["time_phase"],
                    space_k=int(entry["space_k"]), space_phase=entry["space_phase"],
                    amplitude=amp)

    # ------------------------------------------------------------------
    # builders
    # ------------------------------------------------------------------

    def build_grid(self):
        return ReferenceSlab(nx=self.x_nodes, nz=self.z_nodes)

    def build_forcing(self, scale=1.0):
        spec = ForcingSpec.from_entries(
            self.T, fluid_entries=self.forcing_fluid,
            plate_entries=self.forcing_plate,
        )
        return spec.scaled(scale) if scale != 1.0 else spec

    def build_options(self):
        return AssemblyOptions(panel_nodes=self.panel_nodes)

    def build_problem(self, n=None, nt=None, grid=None, scale=1.0):
        n = self.n if n is None else n
        nt = self.nt if nt is None else nt
        if grid is None:
            grid = self.build_grid()
        basis = build_interleaved_basis(
            n, PlateProfile.zero(self.k_max), grid, kappa=self.kappa,
            j_max=self.j_max, m_max=self.m_max,
        )
        return PeriodicProblem(
            basis, grid, self.build_forcing(scale), nt, self.kappa,
            mean=self.mean, options=self.build_options(),
        )

    def build_fp_config(self, eps_cells=None, sigma=None):
        return FixedPointConfig(
            omega=self.omega, tol=self.tol, max_iter=self.max_iter,
            anderson=self.anderson,
            eps_cells=self.eps_cells if eps_cells is None else eps_cells,
            sigma=self.sigma if sigma is None else sigma,
            energy_ceiling=self.energy_ceiling,
        )

    def echo(self):
        """Config snapshot for reports (deterministic key order)."""
        return {
            "mode": self.mode,
            "T": self.T,
            "kappa": self.kappa,
            "m": self.mean,
            "n": self.n,
            "Nt": self.nt,
            "k_max": self.k_max,
            "x_nodes": self.x_nodes,
            "z_nodes": self.z_nodes,
            "omega": self.omega,
            "tol": self.tol,
            "max_iter": self.max_iter,
            "anderson": self.anderson,
            "eps_cells": self.eps_cells,
            "sigma": self.sigma,
            "seed": self.seed,
            "deterministic": self.deterministic,
        }


def load_config(path):
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("<file>", f"TOML parse error: {exc}") from None
    return SolverConfig(raw, path=path)
