"""
Synthetic optimization problems with closed-form constants, their
stochastic gradient oracle and pointwise checks of the standing assumptions.
"""

from typing import Optional

import numpy as np
from scipy.linalg import eigvalsh, lstsq, solve
from scipy.stats import ortho_group

from dcsgd.data_models.problem import (
    ProblemInstance,
    ProblemConstants,
    QuadraticNodeFunction,
)
from dcsgd.exceptions import ParameterError, ConstructionError
from dcsgd.types import DenseVector, Generator, VectorLike
from dcsgd.utils import as_dense_vector

COUNTEREXAMPLE_DIRECTIONS = np.array(
    [[-3.0, 2.0, 2.0], [2.0, -3.0, 2.0], [2.0, 2.0, -3.0]]
)
# relative tolerance for singular Hessians
SINGULAR_TOLERANCE = 1e-12


def make_counterexample(t: float = 1.0) -> ProblemInstance:
    """
    Three nodes in dimension three, f_i(x) = <a_i, x>^2 + 1/4 ||x||^2 with
    a_1 = (-3, 2, 2), a_2 = (2, -3, 2), a_3 = (2, 2, -3), started at (t, t, t).

    Plain compressed SGD with Top-1 diverges on it from any t > 0.
    """
    if not t > 0:
        raise ParameterError(f"Counterexample start t must be positive, got {t}.")
    nodes = [
        QuadraticNodeFunction(2 * np.outer(a, a) + 0.5 * np.eye(3), np.zeros(3))
        for a in COUNTEREXAMPLE_DIRECTIONS
    ]
    return ProblemInstance(nodes, noise_sigma2=0.0, x0=np.full(3, float(t)), name="counterexample")


def make_random_quadratic(
    n: int,
    d: int,
    mu: float,
    L: float,
    heterogeneity: float = 0.0,
    sigma2: float = 0.0,
    seed: int = 0,
) -> ProblemInstance:
    """
    Random strongly convex quadratics with node Hessian spectra in [mu, L].

    Node minimizers are a shared random center shifted by ``heterogeneity``
    times a random direction (of expected unit norm); every node attains
    the minimum value 0. With ``heterogeneity=0`` all nodes share the
    minimizer and D = 0. The run starts at the origin.
    """
    if int(n) != n or n < 1 or int(d) != d or d < 1:
        raise ParameterError(f"Need positive integers n and d, got n={n}, d={d}.")
    if not 0 < mu <= L:
        raise ParameterError(f"Spectrum bounds must satisfy 0 < mu <= L, got mu={mu}, L={L}.")
    if heterogeneity < 0 or sigma2 < 0:
        raise ParameterError("Heterogeneity and noise variance must be non-negative.")
    n, d = int(n), int(d)
    rng = np.random.default_rng(seed)
    center = rng.normal(size=d)
    nodes = list()
    for _ in range(n):
        if d == 1:
            A = np.array([[rng.uniform(mu, L)]])
        else:
            Q = ortho_group.rvs(d, random_state=rng)
            spectrum = rng.uniform(mu, L, size=d)
            spectrum[0], spectrum[-1] = mu, L
            A = Q @ np.diag(spectrum) @ Q.T
            A = (A + A.T) / 2
        minimizer = center + heterogeneity * rng.normal(size=d) / np.sqrt(d)
        nodes.append(
            QuadraticNodeFunction(A, -A @ minimizer, 0.5 * minimizer @ A @ minimizer)
        )
    return ProblemInstance(
        nodes,
        noise_sigma2=float(sigma2),
        x0=np.zeros(d),
        name=f"random_quadratic_n{n}_d{d}_seed{seed}",
    )


def gradient_oracle(
    p: ProblemInstance, i: int, x: VectorLike, rng: Optional[Generator] = None
) -> DenseVector:
    """
    Exact gradient of node ``i`` plus zero-mean Gaussian noise with
    covariance (sigma2 / d) I, i.e. of total variance sigma2.
    """
    if int(i) != i or not 0 <= i < p.n:
        raise ParameterError(f"Node index must lie in [0, {p.n}), got {i}.")
    x = as_dense_vector(x, p.dim)
    g = p.nodes[int(i)].gradient(x)
    if p.noise_sigma2 > 0:
        if rng is None:
            raise ParameterError("A noisy gradient oracle needs a random generator.")
        g = g + rng.normal(0.0, np.sqrt(p.noise_sigma2 / p.dim), size=p.dim)
    return g


def _node_minimizer(node: QuadraticNodeFunction, scale: float) -> DenseVector:
    eig = eigvalsh(node.A)
    if eig.min() < -SINGULAR_TOLERANCE * scale:
        raise ConstructionError("Node Hessian is indefinite: node function is unbounded below.")
    x, *_ = lstsq(node.A, -node.b)
    residual = np.linalg.norm(node.A @ x + node.b)
    if residual > 1e-8 * (1 + np.linalg.norm(node.b)):
        raise ConstructionError("Linear term outside the Hessian range: node function is unbounded below.")
    return x


def problem_constants(p: ProblemInstance) -> ProblemConstants:
    """
    L, L_f, mu, x*, f*, the per-node minima f_i* and minimizers and
    D = (2L/n) sum_i (f_i(x*) - f_i*), all from the quadratic coefficients.
    """
    node_eigs = [eigvalsh(node.A) for node in p.nodes]
    L = float(max(eig.max() for eig in node_eigs))
    average_eig = eigvalsh(p.hessian)
    mu, L_f = float(average_eig.min()), float(average_eig.max())
    if mu <= SINGULAR_TOLERANCE * max(abs(L_f), 1.0):
        raise ConstructionError(
            f"Average Hessian is singular (mu={mu:.3g}): no unique minimizer."
        )
    x_star = solve(p.hessian, -p.linear, assume_a="sym")
    f_star = p.value(x_star)
    scale = max(L, 1.0)
    gaps = list()
    f_i_star = list()
    minimizers = list()
    for node in p.nodes:
        x_i = _node_minimizer(node, scale)
        minimizers.append(x_i)
        f_i_star.append(node.value(x_i))
        # f_i(x*) - f_i* written as a quadratic form around the node minimizer
        delta = x_star - x_i
        gaps.append(max(0.5 * float(delta @ node.A @ delta), 0.0))
    D = 2 * L / p.n * float(np.sum(gaps))
    return ProblemConstants(
        L=L,
        L_f=L_f,
        mu=mu,
        x_star=x_star,
        f_star=f_star,
        f_i_star=np.array(f_i_star),
        node_minimizers=np.array(minimizers),
        D=D,
    )


def check_quasi_convexity(p: ProblemInstance, x: VectorLike) -> float:
    """Slack of f* >= f(x) + <grad f(x), x* - x> + mu/2 ||x* - x||^2 (non-negative when it holds)."""
    x = as_dense_vector(x, p.dim)
    c = p.constants
    step = c.x_star - x
    return c.f_star - (p.value(x) + p.gradient(x) @ step + c.mu / 2 * step @ step)


def check_expected_smoothness(p: ProblemInstance, i: int, x: VectorLike) -> float:
    """Slack of ||grad f_i(x)||^2 <= 2L (f_i(x) - f_i*) for the noiseless oracle."""
    x = as_dense_vector(x, p.dim)
    c = p.constants
    node = p.nodes[i]
    g = node.gradient(x)
    return 2 * c.L * (node.value(x) - c.f_i_star[i]) - float(g @ g)
