"""Independent reference values frozen into the unit tests.

Straight-line numpy/scipy evaluations that share no code with the library.
Run: python3 tests/oracles/oracles.py
"""
import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq


def pattern(n):
    i = np.arange(n)
    return 0.5 * np.sin(0.37 * i + 0.1)


def act(kind, z, w=None):
    if kind == "tanh":
        return np.tanh(z)
    if kind == "swish":
        return z / (1.0 + np.exp(-z))
    return w[0] * np.sin(z) + w[1] * np.cos(z)


def plain(kind, din, dout, L, H, x):
    shapes = [(H, din)] + [(H, H)] * (L - 1) + [(dout, H)]
    n_aff = sum(r * c + r for r, c in shapes)
    p = pattern(n_aff + (2 * L if kind == "sinusoidal" else 0))
    pos, Ws = 0, []
    for r, c in shapes:
        W = p[pos:pos + r * c].reshape(r, c); pos += r * c
        b = p[pos:pos + r]; pos += r
        Ws.append((W, b))
    acts = [p[pos + 2 * l:pos + 2 * l + 2] for l in range(L)]
    h = np.array(x, float)
    for l in range(L):
        W, b = Ws[l]
        h = act(kind, W @ h + b, acts[l] if kind == "sinusoidal" else None)
    W, b = Ws[-1]
    return W @ h + b


def skip(kind, din, dout, L, H, x):
    shapes = [(H, din), (H, din), (H, din)] + [(H, H)] * (L - 1) + [(dout, H)]
    n_aff = sum(r * c + r for r, c in shapes)
    p = pattern(n_aff + (2 * (L + 2) if kind == "sinusoidal" else 0))
    pos, Ws = 0, []
    for r, c in shapes:
        W = p[pos:pos + r * c].reshape(r, c); pos += r * c
        b = p[pos:pos + r]; pos += r
        Ws.append((W, b))
    acts = [p[pos + 2 * l:pos + 2 * l + 2] for l in range(L + 2)]
    w = lambda l: acts[l] if kind == "sinusoidal" else None
    X = np.array(x, float)
    U = act(kind, Ws[0][0] @ X + Ws[0][1], w(0))
    V = act(kind, Ws[1][0] @ X + Ws[1][1], w(1))
    Z = act(kind, Ws[2][0] @ X + Ws[2][1], w(2))
    A = (1 - Z) * U + Z * V
    for k in range(2, L + 1):
        Z = act(kind, Ws[1 + k][0] @ A + Ws[1 + k][1], w(1 + k))
        A = (1 - Z) * U + Z * V
    W, b = Ws[-1]
    return W @ A + b


def blasius(re):
    return 0.316 / re ** 0.25


def swamee(re, eps=0.0, D=0.2):
    return 0.25 / np.log10(eps / (3.7 * D) + 5.74 / re ** 0.9) ** 2


def colebrook(re, eps=0.0, D=0.1):
    g = lambda s: s + 2 * np.log10(eps / (3.7 * D) + 2.51 * s / re)  # s = 1/sqrt(f)
    s = brentq(g, 1.0, 100.0, xtol=1e-15)
    return 1.0 / s ** 2


def liquid_steady(u):
    rho, D, mu, k, Pres, L = 1000.0, 0.1, 1e-3, 1e-5, 2e5, 100.0
    Pout = u * 1e5

    def F(V):
        re = min(max(rho * abs(V) * D / mu, 100.0), 1e8)
        return V - k * (Pres - Pout - 0.5 * rho * blasius(re) * V * abs(V) * L / D)

    V = brentq(F, 1e-9, 10.0, xtol=1e-15)
    return V, Pres - V / k


def gas_steady(u, x_probe):
    D, mu, PI, Pres, L, M, R, T = 0.2, 5e-5, 5e-4, 5e6, 2000.0, 0.03, 8.314, 300.0
    A = np.pi * D * D / 4
    c2 = R * T / M
    Pout = u * 5e6

    def rhs(x, y, G):
        P = y[0]
        rho = P / c2
        re = min(max(abs(G) * D / mu, 100.0), 1e8)
        fric = swamee(re) * G * abs(G) / (2 * D * rho)
        return [-fric / (1 - G * G / (rho * rho * c2))]

    def outlet(G):
        P0 = Pres - G * A / PI
        s = solve_ivp(rhs, (0, L), [P0], args=(G,), rtol=1e-12, atol=1e-6, dense_output=True)
        return s

    def miss(G):
        return outlet(G).y[0, -1] - Pout

    G = brentq(miss, 1.0, 2000.0, xtol=1e-12)
    sol = outlet(G)
    return G * A, sol.sol(x_probe * L)[0], sol.y[0, 0]


def adam_quadratic():
    w, m, v = 0.0, 0.0, 0.0
    lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
    for t in range(1, 501):
        g = w - 3.0
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        w -= lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    return w


def main():
    np.set_printoptions(precision=17)
    for kind in ("tanh", "sinusoidal", "swish"):
        print(f"plain {kind} (2->2x5->2) at (0.5,0.5):", repr(plain(kind, 2, 2, 2, 5, [0.5, 0.5])))
    for kind in ("tanh", "sinusoidal", "swish"):
        print(f"skip {kind} (4->3x6->2) at (0.2,0.8,0.5,0.5):",
              repr(skip(kind, 4, 2, 3, 6, [0.2, 0.8, 0.5, 0.5])))
    print("blasius(1e4) =", repr(blasius(1e4)))
    print("blasius(1e5) =", repr(blasius(1e5)))
    print("swamee_jain(1e6) =", repr(swamee(1e6)))
    print("colebrook(1e5, D=0.1) =", repr(colebrook(1e5)))
    f = blasius(1e5)
    print("inc steady r_mom (V=1, P const) =", repr(0.5 * f * 1.0 / 0.1))
    print("inc transient r_mom (V=1, P const) =", repr(10.0 * 0.5 * f * 1.0 / 0.1))
    print("gas upstream target rhoV =", repr(5e-4 * (5e6 - 3.5e6) / (60 * 50 * np.pi * 0.2 ** 2 / 4)))
    print("eos rho(5e6) =", repr(5e6 * 0.03 / (8.314 * 300)))
    for u in (0.5, 0.1, 0.9):
        V, P0 = liquid_steady(u)
        print(f"liquid steady u={u}: V =", repr(V), " P0 =", repr(P0))
    for u in (0.5, 0.7, 0.3):
        m, p01, p0 = gas_steady(u, 0.1)
        print(f"gas steady u={u}: mdot =", repr(m), " P(0.1) =", repr(p01), " P(0) =", repr(p0))
    print("adam 1-D quadratic w_500 =", repr(adam_quadratic()))
    yt = np.array([1.0, 2.0, 4.0, 3.0, 5.0])
    ye = np.array([1.1, 1.9, 3.7, 3.2, 4.6])
    print("mape example =", repr(np.mean(np.abs(yt - ye) / np.abs(yt)) * 100))
    print("fit example =",
          repr((1 - np.linalg.norm(yt - ye) / np.linalg.norm(yt - yt.mean())) * 100))


if __name__ == "__main__":
    main()
