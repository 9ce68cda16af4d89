"""Generate closed-form forcing terms for the manufactured solution.

Writes Rust functions evaluating f (momentum), g (angular momentum) and
f_b (induction) for the trigonometric exact fields used by the
convergence experiment.  Run from the repository root:

    python3 scripts/gen_sources.py > crates/core/src/manufactured/generated.rs
"""
import re

import sympy as sp
from sympy.printing import rust_code

x, y, z, t = sp.symbols("x y z t", real=True)
nu, nu_r, mu, c0, ca, cd, s = sp.symbols("nu nu_r mu c0 ca cd s", positive=True)
pi = sp.pi
X = (x, y, z)

u = sp.Matrix([
    -2 * (1 - sp.cos(2 * pi * x)) * sp.sin(2 * pi * y) * sp.sin(2 * pi * z) * sp.cos(t),
    (1 - sp.cos(2 * pi * y)) * sp.sin(2 * pi * x) * sp.sin(2 * pi * z) * sp.cos(t),
    (1 - sp.cos(2 * pi * z)) * sp.sin(2 * pi * x) * sp.sin(2 * pi * y) * sp.cos(t),
])
p = (sp.sin(4 * pi * x) + sp.sin(4 * pi * y) + sp.sin(4 * pi * z)) * sp.cos(t)
b = sp.Matrix([
    2 * sp.sin(pi * x) * sp.cos(pi * y) * sp.cos(pi * z) * sp.cos(t),
    -sp.sin(pi * y) * sp.cos(pi * x) * sp.cos(pi * z) * sp.cos(t),
    -sp.sin(pi * z) * sp.cos(pi * x) * sp.cos(pi * y) * sp.cos(t),
])
w = sp.Matrix([
    (1 - sp.cos(2 * pi * x)) * sp.sin(2 * pi * y) * sp.sin(2 * pi * z) * sp.cos(t),
    (1 - sp.cos(2 * pi * y)) * sp.sin(2 * pi * x) * sp.sin(2 * pi * z) * sp.cos(t),
    (1 - sp.cos(2 * pi * z)) * sp.sin(2 * pi * x) * sp.sin(2 * pi * y) * sp.cos(t),
])


def grad(f):
    return sp.Matrix([sp.diff(f, v) for v in X])


def div(v):
    return sum(sp.diff(v[i], X[i]) for i in range(3))


def curl(v):
    return sp.Matrix([
        sp.diff(v[2], y) - sp.diff(v[1], z),
        sp.diff(v[0], z) - sp.diff(v[2], x),
        sp.diff(v[1], x) - sp.diff(v[0], y),
    ])


def lap(v):
    return sp.Matrix([sum(sp.diff(v[i], c, 2) for c in X) for i in range(3)])


def adv(a, v):
    return sp.Matrix([sum(a[j] * sp.diff(v[i], X[j]) for j in range(3)) for i in range(3)])


assert sp.simplify(div(u)) == 0
assert sp.simplify(div(b)) == 0

f = sp.diff(u, t) - (nu + nu_r) * lap(u) + adv(u, u) + s * b.cross(curl(b)) + grad(p) - nu_r * curl(w)
g = (sp.diff(w, t) - (ca + cd) * lap(w) + adv(u, w) + 2 * nu_r * w - nu_r * curl(u)
     - (c0 + cd - ca) * grad(div(w)))
fb = sp.diff(b, t) + mu * curl(curl(b)) - curl(u.cross(b))


INT = re.compile(r"(?<!powi\()(?<![\w.])(\d+)(?![\w.])")


def code(e):
    return INT.sub(r"\1.0", rust_code(e))


# The sympy 1.14 Rust printer rebuilds products of real-valued factors and
# drops parentheses (2*pi*a*(-b - c) prints as 2.0*PI*a*-b - c). Printing
# assumption-free stand-ins avoids that path.
PLAIN = {v: sp.Symbol(v.name) for v in (x, y, z, t, nu, nu_r, mu, c0, ca, cd, s)}
PLAIN[pi] = sp.Symbol("PI")


def emit(name, expr):
    out = [e.subs(PLAIN) for e in expr]
    subs, reduced = sp.cse(out, optimizations="basic")
    print(f"pub(crate) fn {name}(x: f64, y: f64, z: f64, t: f64, prm: &ModelParams) -> [f64; 3] {{")
    print("    let (nu, nu_r, mu, c0, ca, cd, s) = (prm.nu, prm.nu_r, prm.mu, prm.c0, prm.ca, prm.cd, prm.s);")
    print("    let _ = (nu, nu_r, mu, c0, ca, cd, s);")
    for sym, e in subs:
        print(f"    let {sym} = {code(e)};")
    comps = ", ".join(code(e) for e in reduced)
    print(f"    [{comps}]")
    print("}")
    print()


print("// @generated by scripts/gen_sources.py; do not edit by hand.")
print("#![allow(clippy::all, non_snake_case, unused_parens)]")
print()
print("use std::f64::consts::PI;")
print()
print("use crate::assembly::ModelParams;")
print()
emit("momentum_source", f)
emit("angular_source", g)
emit("induction_source", fb)
