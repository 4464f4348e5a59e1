"""Naive list-of-lists Kalman filter used as an independent oracle.

Shares no code with the package: matrices are rebuilt from the model
equations by hand and every product is an explicit triple loop.
"""


def matmul(a, b):
    return [[sum(a[i][k] * b[k][j] for k in range(len(b))) for j in range(len(b[0]))] for i in range(len(a))]


def transpose(a):
    return [list(r) for r in zip(*a)]


def add(a, b):
    return [[x + y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def identity(n):
    return [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]


def model_matrices(p, c_p, c_v):
    dt = p["dt"]
    a = [
        [1.0, dt, 0.0, 0.0],
        [-dt * p["k1"], 1.0 - dt * p["lambda1"], dt * p["k1"], 0.0],
        [0.0, 0.0, 1.0, dt * (p["k3"] * c_p + p["k4"] * c_v)],
        [0.0, 0.0, 0.0, 1.0],
    ]
    b = [0.0, dt * p["k2"], 0.0, 0.0]
    q = [[0.0] * 4 for _ in range(4)]
    q[1][1], q[2][2], q[3][3] = dt * p["q_x"], dt * p["q_eta"], dt * p["q_xi"]
    return a, b, q


def run(p, c_p, c_v, ys, mean0, cov0):
    """Return per-tick (mean, cov) after predict+update with Joseph covariance."""
    m = [float(v) for v in mean0]
    P = [[float(v) for v in row] for row in cov0]
    out = []
    for cp, cv, y in zip(c_p, c_v, ys):
        a, b, q = model_matrices(p, cp, cv)
        m = [sum(a[i][j] * m[j] for j in range(4)) + b[i] * cp for i in range(4)]
        P = add(matmul(matmul(a, P), transpose(a)), q)
        P = [[0.5 * (P[i][j] + P[j][i]) for j in range(4)] for i in range(4)]
        s = P[0][0] + p["r"]
        k = [P[i][0] / s for i in range(4)]
        z = y - m[0]
        m = [m[i] + k[i] * z for i in range(4)]
        ikh = identity(4)
        for i in range(4):
            ikh[i][0] -= k[i]
        P = add(matmul(matmul(ikh, P), transpose(ikh)), [[p["r"] * k[i] * k[j] for j in range(4)] for i in range(4)])
        P = [[0.5 * (P[i][j] + P[j][i]) for j in range(4)] for i in range(4)]
        out.append((list(m), [list(r) for r in P]))
    return out
