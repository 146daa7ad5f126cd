"""Model definitions, grids and path containers.

A network is described by a rate function ``f`` and a memory kernel ``h``.
Both come in two flavours: closed-form builtin families with exact
derivatives and constants, and user expressions parsed from strings.  Each
component also knows how to present itself to the compiled simulation core
(a family code plus parameters, or generated source).
"""

import ast
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numba import njit
from scipy import integrate, optimize

__all__ = [
    "RateFunction",
    "MemoryKernel",
    "ModelSpec",
    "MultiClassSpec",
    "TimeGrid",
    "GridFunction",
    "EventPaths",
    "FixedPoint",
    "sigmoid_rate",
    "constant_rate",
    "linear_rate",
    "expression_rate",
    "erlang_kernel",
    "zero_kernel",
    "linear_kernel",
    "expression_kernel",
    "builtin_model",
    "fixed_points",
    "BUILTIN_MODELS",
]

MAX_GRID_STEPS = 10_000

# numba family codes
RATE_SIGMOID, RATE_CONSTANT, RATE_LINEAR = 0.0, 1.0, 2.0
KERNEL_ERLANG, KERNEL_ZERO, KERNEL_LINEAR = 0.0, 1.0, 2.0
# recursion strategy of the simulation core per kernel
HKIND_GENERIC, HKIND_ERLANG, HKIND_ZERO = 0, 1, 2

_PROBE_POINTS = 10_000
_INFLATE = 1.1


# ---------------------------------------------------------------------------
# expression parsing

_ALLOWED_FUNCS = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "tanh": np.tanh,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "arctan": np.arctan,
    "abs": np.abs,
    "maximum": np.maximum,
    "minimum": np.minimum,
}
_ALLOWED_CONSTS = {"pi": math.pi, "e": math.e}
_ALLOWED_NODES = (
    ast.Expression,
    ast.BinOp,
    ast.UnaryOp,
    ast.Call,
    ast.Name,
    ast.Load,
    ast.Constant,
    ast.Add,
    ast.Sub,
    ast.Mult,
    ast.Div,
    ast.Pow,
    ast.USub,
    ast.UAdd,
)


def _parse_expression(expr, var, params=None):
    """Validate ``expr`` and return it with parameters inlined as literals."""
    params = dict(params or {})
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse expression {expr!r}: {exc}") from None
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ValueError(f"disallowed syntax {type(node).__name__} in {expr!r}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _ALLOWED_FUNCS:
                raise ValueError(f"unknown function in {expr!r}")
        if isinstance(node, ast.Name):
            name = node.id
            if name not in _ALLOWED_FUNCS and name not in _ALLOWED_CONSTS \
                    and name != var and name not in params:
                raise ValueError(f"unknown name {name!r} in {expr!r}")

    class _Inline(ast.NodeTransformer):
        def visit_Name(self, node):
            if node.id in params:
                return ast.copy_location(ast.Constant(float(params[node.id])), node)
            if node.id in _ALLOWED_CONSTS:
                return ast.copy_location(ast.Constant(_ALLOWED_CONSTS[node.id]), node)
            return node

    tree = ast.fix_missing_locations(_Inline().visit(tree))
    return ast.unparse(tree)


def _numpy_callable(src, var):
    code = compile(src, "<expr>", "eval")
    ns = dict(_ALLOWED_FUNCS)

    def fn(v):
        v = np.asarray(v, dtype=float)
        out = eval(code, ns, {var: v})
        return np.broadcast_to(np.asarray(out, dtype=float), v.shape).copy() \
            if v.ndim else float(out)

    return fn


def _central_difference(fn):
    def deriv(v):
        v = np.asarray(v, dtype=float)
        step = 1e-6 * np.maximum(1.0, np.abs(v))
        out = (fn(v + step) - fn(v - step)) / (2 * step)
        return out if v.ndim else float(out)

    return deriv


# ---------------------------------------------------------------------------
# components


@dataclass(frozen=True, eq=False)
class RateFunction:
    """Rate function ``f`` with derivative and global constants.

    ``sup_f`` is a global upper bound on ``f`` (``inf`` when unknown) and is
    only used to tighten thinning bounds.  ``domain`` is the probe interval
    for the spot checks.
    """

    name: str
    f: object
    f_prime: object
    lip_f: float
    sup_f_prime: float
    lip_f_prime: float
    sup_f: float = math.inf
    domain: tuple = (-5.0, 5.0)
    code: float | None = None
    params: tuple = ()
    source: str | None = None
    estimated: bool = False


@dataclass(frozen=True, eq=False)
class MemoryKernel:
    """Memory kernel ``h`` on the half line with its derivative."""

    name: str
    h: object
    h_prime: object
    code: float | None = None
    params: tuple = ()
    source: str | None = None
    hkind: int = HKIND_GENERIC
    estimated: bool = False
    _norms: object = None

    def sup_h(self, T):
        """sup |h| on [0, T]."""
        if self._norms is not None:
            return self._norms(T)[0]
        return _probe_sup(self.h, T)

    def sup_h_prime(self, T):
        """sup |h'| on [0, T]."""
        if self._norms is not None:
            return self._norms(T)[1]
        return _probe_sup(self.h_prime, T)

    def l1_h_prime(self, T):
        """L1 norm of h' on [0, T]."""
        if self._norms is not None:
            return self._norms(T)[2]
        t = np.linspace(0.0, T, _PROBE_POINTS + 1)
        return _INFLATE * float(integrate.trapezoid(np.abs(self.h_prime(t)), t))


def _probe_sup(fn, T):
    t = np.linspace(0.0, T, _PROBE_POINTS + 1)
    return _INFLATE * float(np.max(np.abs(fn(t))))


def sigmoid_rate(gamma, center=0.5):
    """Logistic rate ``1 / (1 + exp(-gamma (x - center)))``."""
    if not gamma > 0:
        raise ValueError("sigmoid steepness gamma must be positive")
    g, c = float(gamma), float(center)

    def f(x):
        return 1.0 / (1.0 + np.exp(-g * (np.asarray(x, dtype=float) - c)))

    def f_prime(x):
        s = f(x)
        return g * s * (1.0 - s)

    return RateFunction(
        name=f"sigmoid(gamma={g:g})",
        f=f,
        f_prime=f_prime,
        lip_f=g / 4.0,
        sup_f_prime=g / 4.0,
        # max of p(1-p)|1-2p| over p in (0, 1) is 1/(6 sqrt 3)
        lip_f_prime=g * g / (6.0 * math.sqrt(3.0)),
        sup_f=1.0,
        code=RATE_SIGMOID,
        params=(g, c),
    )


def constant_rate(c):
    if not c >= 0:
        raise ValueError("constant rate must be non-negative")
    c = float(c)
    return RateFunction(
        name=f"constant(c={c:g})",
        f=lambda x: np.full_like(np.asarray(x, dtype=float), c) if np.ndim(x) else c,
        f_prime=lambda x: np.zeros_like(np.asarray(x, dtype=float)) if np.ndim(x) else 0.0,
        lip_f=0.0,
        sup_f_prime=0.0,
        lip_f_prime=0.0,
        sup_f=c,
        code=RATE_CONSTANT,
        params=(c,),
    )


def linear_rate(slope, intercept=1.0):
    """Affine rate ``intercept + slope * x``; non-negative for x >= 0 only."""
    a, c = float(intercept), float(slope)
    if a < 0 or c < 0:
        raise ValueError("linear rate needs non-negative intercept and slope")
    return RateFunction(
        name=f"linear(c={c:g}, a={a:g})",
        f=lambda x: a + c * np.asarray(x, dtype=float) if np.ndim(x) else a + c * x,
        f_prime=lambda x: np.full_like(np.asarray(x, dtype=float), c) if np.ndim(x) else c,
        lip_f=c,
        sup_f_prime=c,
        lip_f_prime=0.0,
        domain=(0.0, 5.0),
        code=RATE_LINEAR,
        params=(a, c),
    )


def expression_rate(expr, derivative=None, domain=(-5.0, 5.0), params=None, sup_f=math.inf):
    """Rate function from an expression in ``x``.

    Without ``derivative`` the derivative is a central difference.  Lipschitz
    constants are probe estimates over ``domain`` inflated by 10%.
    """
    src = _parse_expression(expr, "x", params)
    f = _numpy_callable(src, "x")
    if derivative is not None:
        f_prime = _numpy_callable(_parse_expression(derivative, "x", params), "x")
    else:
        f_prime = _central_difference(f)
    x = np.linspace(domain[0], domain[1], _PROBE_POINTS)
    fp = f_prime(x)
    sup_fp = _INFLATE * float(np.max(np.abs(fp)))
    lip_fp = _INFLATE * float(np.max(np.abs(np.diff(fp) / np.diff(x))))
    return RateFunction(
        name=f"expr({expr})",
        f=f,
        f_prime=f_prime,
        lip_f=sup_fp,
        sup_f_prime=sup_fp,
        lip_f_prime=lip_fp,
        sup_f=float(sup_f),
        domain=tuple(float(d) for d in domain),
        source=src,
        estimated=True,
    )


def _erlang_norms(beta, w):
    peak = 1.0 / beta

    def h_abs(t):
        return abs(w) * beta * beta * t * math.exp(-beta * t)

    def norms(T):
        sup_h = h_abs(min(peak, T))
        sup_hp = abs(w) * beta * beta
        l1 = 2.0 * h_abs(min(peak, T)) - h_abs(T)
        return sup_h, sup_hp, l1

    return norms


def erlang_kernel(beta, weight=1.0):
    """``weight * beta^2 t exp(-beta t)``; integrates to ``weight``."""
    if not beta > 0:
        raise ValueError("kernel rate beta must be positive")
    b, w = float(beta), float(weight)

    def h(t):
        t = np.asarray(t, dtype=float)
        return w * b * b * t * np.exp(-b * t)

    def h_prime(t):
        t = np.asarray(t, dtype=float)
        return w * b * b * (1.0 - b * t) * np.exp(-b * t)

    return MemoryKernel(
        name=f"erlang(beta={b:g})" if w == 1.0 else f"erlang(beta={b:g}, w={w:g})",
        h=h,
        h_prime=h_prime,
        code=KERNEL_ERLANG,
        params=(b, w),
        hkind=HKIND_ERLANG,
        _norms=_erlang_norms(b, w),
    )


def zero_kernel():
    z = lambda t: np.zeros_like(np.asarray(t, dtype=float))
    return MemoryKernel(
        name="zero", h=z, h_prime=z, code=KERNEL_ZERO, hkind=HKIND_ZERO,
        _norms=lambda T: (0.0, 0.0, 0.0),
    )


def linear_kernel(weight=1.0):
    """``weight * t``; unbounded, so only meaningful on a finite horizon."""
    w = float(weight)
    return MemoryKernel(
        name="linear" if w == 1.0 else f"linear(w={w:g})",
        h=lambda t: w * np.asarray(t, dtype=float),
        h_prime=lambda t: np.full_like(np.asarray(t, dtype=float), w),
        code=KERNEL_LINEAR,
        params=(w,),
        _norms=lambda T: (abs(w) * T, abs(w), abs(w) * T),
    )


def expression_kernel(expr, derivative=None, params=None):
    """Memory kernel from an expression in ``t``; must vanish at 0."""
    src = _parse_expression(expr, "t", params)
    h = _numpy_callable(src, "t")
    if derivative is not None:
        h_prime = _numpy_callable(_parse_expression(derivative, "t", params), "t")
    else:
        h_prime = _central_difference(h)
    return MemoryKernel(
        name=f"expr({expr})", h=h, h_prime=h_prime, source=src, estimated=True
    )


# ---------------------------------------------------------------------------
# numba dispatch


@njit(cache=True)
def family_rate(k, x, P):
    code = P[k, 0]
    if code == 0.0:
        return 1.0 / (1.0 + np.exp(-P[k, 1] * (x - P[k, 2])))
    elif code == 1.0:
        return P[k, 1]
    return P[k, 1] + P[k, 2] * x


@njit(cache=True)
def family_kernel(k, l, t, P):
    code = P[k, l, 0]
    if code == 0.0:
        b = P[k, l, 1]
        return P[k, l, 2] * b * b * t * np.exp(-b * t)
    elif code == 1.0:
        return 0.0
    return P[k, l, 1] * t


_GENERATED = {}


def _compile_source(src):
    fn = _GENERATED.get(src)
    if fn is None:
        ns = dict(_ALLOWED_FUNCS)
        ns["family_rate"] = family_rate
        ns["family_kernel"] = family_kernel
        exec(src, ns)
        fn = njit(ns["_generated"])
        _GENERATED[src] = fn
    return fn


def _rate_dispatch(rates):
    if all(r.source is None for r in rates):
        return family_rate
    lines = ["def _generated(k, x, P):"]
    for k, r in enumerate(rates):
        body = f"({r.source})" if r.source is not None else "family_rate(k, x, P)"
        lines.append(f"    if k == {k}:\n        return 1.0 * {body}")
    lines.append("    return 0.0")
    return _compile_source("\n".join(lines) + "\n")


def _kernel_dispatch(kernels):
    flat = [kern for row in kernels for kern in row]
    if all(kern.source is None for kern in flat):
        return family_kernel
    lines = ["def _generated(k, l, t, P):"]
    K = len(kernels)
    for k in range(K):
        for l in range(K):
            kern = kernels[k][l]
            body = f"({kern.source})" if kern.source is not None else "family_kernel(k, l, t, P)"
            lines.append(f"    if k == {k} and l == {l}:\n        return 1.0 * {body}")
    lines.append("    return 0.0")
    return _compile_source("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# model definitions


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Single-population model ``(f, h)``."""

    rate: RateFunction
    kernel: MemoryKernel
    name: str = ""

    def __post_init__(self):
        if not self.name:
            object.__setattr__(self, "name", f"{self.rate.name}+{self.kernel.name}")
        _check_components(self.rate, [self.kernel])

    @property
    def f(self):
        return self.rate.f

    @property
    def f_prime(self):
        return self.rate.f_prime

    @property
    def h(self):
        return self.kernel.h

    @property
    def h_prime(self):
        return self.kernel.h_prime

    @property
    def lip_f(self):
        return self.rate.lip_f

    @property
    def sup_f_prime(self):
        return self.rate.sup_f_prime

    @property
    def lip_f_prime(self):
        return self.rate.lip_f_prime

    @property
    def estimated(self):
        return self.rate.estimated or self.kernel.estimated

    @cached_property
    def multiclass(self):
        return MultiClassSpec([self.rate], [[self.kernel]], (1.0,), name=self.name)

    def kappa_bound(self, T):
        """``M_T = ||f'||_inf ||h'||_{L1[0,T]}``."""
        return self.sup_f_prime * self.kernel.l1_h_prime(T)


def _check_components(rate, kernels):
    h0 = [float(k.h(0.0)) for k in kernels]
    if any(v != 0.0 for v in h0):
        raise ValueError(f"memory kernel must vanish at 0, got h(0) = {h0}")
    lo, hi = rate.domain
    x = np.linspace(lo, hi, 201)
    if np.any(rate.f(x) < 0):
        raise ValueError(f"rate {rate.name} takes negative values on {rate.domain}")


@dataclass(frozen=True, eq=False)
class MultiClassSpec:
    """K interacting populations.

    ``kernels[k][l]`` is the kernel through which class ``l`` drives class
    ``k``; ``p`` holds the asymptotic class proportions.
    """

    rates: list
    kernels: list
    p: tuple
    name: str = "multiclass"

    def __post_init__(self):
        K = len(self.rates)
        if K < 1 or len(self.kernels) != K or any(len(row) != K for row in self.kernels):
            raise ValueError("need K rates and a K x K kernel matrix")
        if len(self.p) != K or any(not 0 < q <= 1 for q in self.p):
            raise ValueError("proportions must lie in (0, 1], one per class")
        if abs(sum(self.p) - 1.0) > 1e-9:
            raise ValueError("proportions must sum to 1")
        for k in range(K):
            _check_components(self.rates[k], self.kernels[k])

    @property
    def K(self):
        return len(self.rates)

    def sizes(self, N):
        """Class sizes summing to ``N`` by largest remainder, each >= 1."""
        N = int(N)
        if N < self.K:
            raise ValueError(f"need at least one unit per class (N >= {self.K})")
        raw = np.asarray(self.p) * N
        n = np.maximum(np.floor(raw).astype(int), 1)
        order = np.argsort(-(raw - np.floor(raw)), kind="stable")
        i = 0
        while n.sum() < N:
            n[order[i % self.K]] += 1
            i += 1
        while n.sum() > N:
            j = int(np.argmax(n))
            n[j] -= 1
        return tuple(int(v) for v in n)

    def kernel_norms(self, T):
        """Arrays (sup|h|, sup|h'|, ||h'||_L1) of shape (K, K)."""
        K = self.K
        out = np.zeros((3, K, K))
        for k in range(K):
            for l in range(K):
                kern = self.kernels[k][l]
                out[:, k, l] = kern.sup_h(T), kern.sup_h_prime(T), kern.l1_h_prime(T)
        return out

    def kappa_bound(self, T):
        """Row-sum bound on the matrix kernel, sqrt(p_k/p_l) weights included."""
        l1 = self.kernel_norms(T)[2]
        p = np.asarray(self.p)
        w = np.sqrt(p[:, None] / p[None, :])
        fp = np.array([r.sup_f_prime for r in self.rates])
        return float(np.max((fp[:, None] * w * l1).sum(axis=1)))

    @cached_property
    def compiled(self):
        """(rate_fn, kernel_fn, fpar, hpar, hkind) for the simulation core."""
        K = self.K
        fpar = np.zeros((K, 4))
        for k, r in enumerate(self.rates):
            if r.code is not None:
                fpar[k, 0] = r.code
                fpar[k, 1:1 + len(r.params)] = r.params
            else:
                fpar[k, 0] = -1.0
        hpar = np.zeros((K, K, 4))
        hkind = np.zeros((K, K), dtype=np.int64)
        for k in range(K):
            for l in range(K):
                kern = self.kernels[k][l]
                hpar[k, l, 0] = kern.code if kern.code is not None else -1.0
                hpar[k, l, 1:1 + len(kern.params)] = kern.params
                hkind[k, l] = kern.hkind
        return _rate_dispatch(self.rates), _kernel_dispatch(self.kernels), fpar, hpar, hkind


# ---------------------------------------------------------------------------
# grids and paths


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = k T / n_steps`` on [0, T]."""

    T: float
    n_steps: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError("n_steps must be a positive integer")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def dt(self):
        return self.T / self.n_steps

    @cached_property
    def t(self):
        t = np.arange(self.n_steps + 1) * self.dt
        t[-1] = self.T
        t.setflags(write=False)
        return t

    def __len__(self):
        return self.n_steps + 1

    def index(self, t):
        """Index of the grid point nearest to ``t``."""
        return int(round(float(t) / self.dt))

    def refine(self, factor):
        return TimeGrid(self.T, self.n_steps * int(factor))


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.grid),):
            raise ValueError(f"expected {len(self.grid)} values, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    def __call__(self, t):
        return np.interp(t, self.grid.t, self.values)

    def sup_norm(self):
        return float(np.max(np.abs(self.values)))

    def at(self, t):
        return float(self.values[self.grid.index(t)])


@dataclass(frozen=True, eq=False)
class EventPaths:
    """Jump times of N counting processes on (0, T].

    ``times`` is globally sorted and ``units[j]`` is the unit of the j-th
    jump; ``unit_class`` labels units by population.
    """

    grid: TimeGrid
    unit_count: int
    times: np.ndarray
    units: np.ndarray
    unit_class: np.ndarray = None
    replicate: int = 0

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        units = np.asarray(self.units, dtype=np.int64)
        if times.shape != units.shape:
            raise ValueError("times and units must align")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "units", units)
        uc = self.unit_class
        uc = np.zeros(self.unit_count, dtype=np.int64) if uc is None else np.asarray(uc, np.int64)
        object.__setattr__(self, "unit_class", uc)

    def validate(self):
        """Check ordering, range and global distinctness of jump times."""
        t = self.times
        if t.size:
            if np.any(np.diff(t) <= 0):
                raise ValueError("jump times are not strictly increasing across units")
            if t[0] <= 0 or t[-1] > self.grid.T:
                raise ValueError("jump times outside (0, T]")
            if np.any(self.units < 0) or np.any(self.units >= self.unit_count):
                raise ValueError("unit index out of range")
        return self

    def per_unit(self):
        order = np.argsort(self.units, kind="stable")
        bounds = np.searchsorted(self.units[order], np.arange(self.unit_count + 1))
        t = self.times[order]
        return [t[bounds[i]:bounds[i + 1]] for i in range(self.unit_count)]

    def unit_counts(self, t=None):
        """Z_i(t) for every unit (t defaults to T)."""
        mask = slice(None) if t is None else self.times <= t
        return np.bincount(self.units[mask], minlength=self.unit_count)

    def total_on_grid(self, cls=None):
        """Total jump count up to each grid time (optionally one class)."""
        t = self.times if cls is None else self.times[self.unit_class[self.units] == cls]
        return np.searchsorted(t, self.grid.t, side="right").astype(float)

    def class_sizes(self):
        return np.bincount(self.unit_class, minlength=int(self.unit_class.max()) + 1)


# ---------------------------------------------------------------------------
# builtins and fixed points


BUILTIN_MODELS = ("sigmoid_erlang", "constant_rate", "linear_toy")


def builtin_model(name, params=()):
    """Named model family.

    ``sigmoid_erlang``: params ``(gamma, beta)``.
    ``constant_rate``: params ``(c,)`` or ``(c, beta)``; Erlang kernel with
    beta = 1 by default.
    ``linear_toy``: params ``(c,)`` or ``(c, a)``; ``f(x) = a + c x`` with
    ``a = 1`` by default and ``h(t) = t``.
    """
    params = tuple(float(p) for p in params)
    if name == "sigmoid_erlang":
        if len(params) != 2:
            raise ValueError("sigmoid_erlang needs (gamma, beta)")
        gamma, beta = params
        if gamma <= 0 or beta <= 0:
            raise ValueError("sigmoid_erlang needs gamma > 0 and beta > 0")
        return ModelSpec(sigmoid_rate(gamma), erlang_kernel(beta),
                         name=f"sigmoid_erlang(gamma={gamma:g}, beta={beta:g})")
    if name == "constant_rate":
        if len(params) not in (1, 2):
            raise ValueError("constant_rate needs (c,) or (c, beta)")
        c = params[0]
        beta = params[1] if len(params) == 2 else 1.0
        return ModelSpec(constant_rate(c), erlang_kernel(beta),
                         name=f"constant_rate(c={c:g})")
    if name == "linear_toy":
        if len(params) not in (1, 2):
            raise ValueError("linear_toy needs (c,) or (c, a)")
        c = params[0]
        a = params[1] if len(params) == 2 else 1.0
        return ModelSpec(linear_rate(c, a), linear_kernel(),
                         name=f"linear_toy(c={c:g}, a={a:g})")
    raise ValueError(f"unknown builtin model {name!r}; choose from {BUILTIN_MODELS}")


@dataclass(frozen=True)
class FixedPoint:
    x: float
    slope: float
    stable: bool


def fixed_points(spec, tol=1e-8, bracket=(0.0, 1.0), n_scan=2001):
    """Solutions of ``f(x) = x`` in ``bracket``, flagged stable iff |f'(x)| < 1.

    Only meaningful when the kernel has unit mass, which is checked first.
    """
    mass, _ = integrate.quad(lambda t: float(spec.h(t)), 0.0, np.inf, limit=200)
    if abs(mass - 1.0) > max(tol, 1e-8):
        raise ValueError(f"kernel mass is {mass:.10g}, fixed-point analysis needs 1")
    lo, hi = map(float, bracket)
    g = lambda x: float(spec.f(x)) - x
    xs = np.linspace(lo, hi, n_scan)
    gs = np.array([g(x) for x in xs])
    roots = []
    for i in range(n_scan):
        if gs[i] == 0.0:
            roots.append(xs[i])
        elif i + 1 < n_scan and gs[i] * gs[i + 1] < 0:
            roots.append(optimize.brentq(g, xs[i], xs[i + 1], xtol=tol * 1e-3, rtol=4 * np.finfo(float).eps))
    if not roots:
        raise ValueError(f"f(x) - x has no sign change on {bracket}")
    out = []
    for x in roots:
        slope = float(spec.f_prime(x))
        if abs(abs(slope) - 1.0) < 1e-12:
            warnings.warn(f"fixed point {x:g} is critical (|f'| = 1)", stacklevel=2)
        out.append(FixedPoint(float(x), slope, abs(slope) < 1.0))
    return out
