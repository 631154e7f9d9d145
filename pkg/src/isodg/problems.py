"""Manufactured transport problems used by the studies and tests."""
import numpy as np

from .assembly import TransportProblem

DISC_DIRECTION = np.array([np.sqrt(3.0) / 2.0, 0.5])
BALL_DIRECTION = np.full(3, 1.0 / np.sqrt(3.0))


def manufactured(direction, exact, exact_grad, sigma=1.0, name="manufactured"):
    """Problem whose source is ``Omega.grad I + sigma I`` for the given ``I``."""
    direction = np.asarray(direction, dtype=float)
    sig = sigma if callable(sigma) else (lambda x, c=float(sigma): np.full(np.shape(x)[:-1], c))

    def source(x):
        return exact_grad(x) @ direction + sig(x) * exact(x)

    return TransportProblem(direction, sigma=sig, source=source, inflow=exact,
                            exact=exact, exact_grad=exact_grad, name=name)


def _disc_exact(x):
    X, Y = x[..., 0], x[..., 1]
    return np.sin(np.pi * X + np.pi * Y) + X**2 + Y**2 + X * Y + 5.0


def _disc_grad(x):
    X, Y = x[..., 0], x[..., 1]
    c = np.pi * np.cos(np.pi * X + np.pi * Y)
    return np.stack([c + 2 * X + Y, c + 2 * Y + X], axis=-1)


def disc_problem():
    """``I = sin(pi x + pi y) + x^2 + y^2 + xy + 5``, ``Omega = (sqrt3/2, 1/2)``, ``sigma = 1``."""
    return manufactured(DISC_DIRECTION, _disc_exact, _disc_grad, name="disc2d")


def _ball_exact(x):
    X, Y, Z = x[..., 0], x[..., 1], x[..., 2]
    return np.sin(np.pi * (X + Y + Z)) + X**2 + Y**2 + Z**2 + X * Y * Z + 5.0


def _ball_grad(x):
    X, Y, Z = x[..., 0], x[..., 1], x[..., 2]
    c = np.pi * np.cos(np.pi * (X + Y + Z))
    return np.stack([c + 2 * X + Y * Z, c + 2 * Y + X * Z, c + 2 * Z + X * Y], axis=-1)


def ball_problem():
    """``I = sin(pi(x+y+z)) + |x|^2 + xyz + 5``, ``Omega = (1,1,1)/sqrt3``, ``sigma = 1``."""
    return manufactured(BALL_DIRECTION, _ball_exact, _ball_grad, name="ball3d")


def constant_problem(direction):
    """``sigma = f = g = 1`` so that ``I = 1``."""
    d = len(direction)
    one = lambda x: np.ones(np.shape(x)[:-1])  # noqa: E731
    zero = lambda x: np.zeros(np.shape(x)[:-1] + (d,))  # noqa: E731
    return manufactured(direction, one, zero, name="constant")


def polynomial_problem(direction, degree, seed=0):
    """Random fixed polynomial of total degree ``degree`` as exact solution."""
    d = len(direction)
    rng = np.random.default_rng(seed)
    exps = [e for e in np.ndindex(*(degree + 1,) * d) if sum(e) <= degree]
    coef = rng.uniform(-1.0, 1.0, len(exps))
    exps = np.array(exps)

    def exact(x):
        x = np.asarray(x, dtype=float)
        return np.sum(coef * np.prod(x[..., None, :] ** exps, axis=-1), axis=-1)

    def grad(x):
        x = np.asarray(x, dtype=float)
        out = []
        for a in range(d):
            low = exps.copy()
            low[:, a] = np.maximum(low[:, a] - 1, 0)
            out.append(np.sum(coef * exps[:, a] * np.prod(x[..., None, :] ** low, axis=-1), axis=-1))
        return np.stack(out, axis=-1)

    return manufactured(direction, exact, grad, name=f"poly{degree}")
