// @generated by scripts/gen_sources.py; do not edit by hand.
#![allow(clippy::all, non_snake_case, unused_parens)]

use std::f64::consts::PI;

use crate::assembly::ModelParams;

pub(crate) fn momentum_source(x: f64, y: f64, z: f64, t: f64, prm: &ModelParams) -> [f64; 3] {
    let (nu, nu_r, mu, c0, ca, cd, s) = (prm.nu, prm.nu_r, prm.mu, prm.c0, prm.ca, prm.cd, prm.s);
    let _ = (nu, nu_r, mu, c0, ca, cd, s);
    let x0 = t.cos();
    let x1 = PI*x;
    let x2 = t.sin();
    let x3 = PI*y;
    let x4 = 2.0*x3;
    let x5 = x4.sin();
    let x6 = 2.0*x5;
    let x7 = 2.0*x1;
    let x8 = x7.cos();
    let x9 = x8 - 1.0;
    let x10 = PI*z;
    let x11 = 2.0*x10;
    let x12 = x11.sin();
    let x13 = x12*x9;
    let x14 = PI.powi(2);
    let x15 = nu + nu_r;
    let x16 = x7.sin();
    let x17 = x5.powi(2);
    let x18 = x16*x17;
    let x19 = x0.powi(2);
    let x20 = PI*x19;
    let x21 = x12.powi(2)*x20;
    let x22 = x21*x9;
    let x23 = x4.cos();
    let x24 = 4.0*x16;
    let x25 = x23 - 1.0;
    let x26 = x22*x25;
    let x27 = x11.cos();
    let x28 = x27*x9;
    let x29 = x27 - 1.0;
    let x30 = x20*x29;
    let x31 = -x25;
    let x32 = x3.sin();
    let x33 = x10.cos();
    let x34 = x33.powi(2);
    let x35 = x10.sin();
    let x36 = x3.cos();
    let x37 = x36.powi(2);
    let x38 = x1.sin();
    let x39 = s*x20;
    let x40 = 6.0*x38.powi(2)*x39;
    let x41 = x16.powi(2);
    [2.0*PI*nu_r*x0*x16*(x23*x29 + x27*x31) + 4.0*PI*x0*(4.0*x1).cos() + 8.0*x0*x12*x14*x15*x5*(3.0*x8 - 2.0) - x13*x2*x6 - 8.0*x18*x22 - 4.0*x18*x28*x30 - x23*x24*x26 - 3.0*x38*x39*(x32.powi(2)*x34 + x35.powi(2)*x37)*x1.cos(), -PI*nu_r*x0*x6*(-x28 + x29*x8) + 4.0*PI*x0*(4.0*x3).cos() + 2.0*PI*x19*x25*x27*x29*x41*x5 - x0*x12*x14*x15*x24*(3.0*x23 - 2.0) + x12*x16*x2*x25 - x21*x25*x41*x6 - 4.0*x26*x5*x8 - x32*x34*x36*x40, 2.0*PI*nu_r*x0*x12*(-x23*x9 - x31*x8) + 4.0*PI*x0*(4.0*x10).cos() + 2.0*PI*x12*x19*x23*x25*x29*x41 - x0*x14*x15*x24*x5*(3.0*x27 - 2.0) - 2.0*x12*x17*x30*x41 - 4.0*x13*x17*x20*x29*x8 + x16*x2*x29*x5 - x33*x35*x37*x40]
}

pub(crate) fn angular_source(x: f64, y: f64, z: f64, t: f64, prm: &ModelParams) -> [f64; 3] {
    let (nu, nu_r, mu, c0, ca, cd, s) = (prm.nu, prm.nu_r, prm.mu, prm.c0, prm.ca, prm.cd, prm.s);
    let _ = (nu, nu_r, mu, c0, ca, cd, s);
    let x0 = t.sin();
    let x1 = 2.0*PI;
    let x2 = x1*z;
    let x3 = x2.sin();
    let x4 = x*x1;
    let x5 = x4.cos();
    let x6 = x5 - 1.0;
    let x7 = x1*y;
    let x8 = x7.sin();
    let x9 = x6*x8;
    let x10 = 2.0*x6;
    let x11 = t.cos();
    let x12 = nu_r*x11;
    let x13 = x12*x3;
    let x14 = x3*x5;
    let x15 = PI.powi(2)*x11;
    let x16 = x15*x8;
    let x17 = 12.0*c0 - 12.0*ca + 12.0*cd;
    let x18 = 4.0*ca + 4.0*cd;
    let x19 = x18*x3;
    let x20 = x11.powi(2);
    let x21 = x20*x3.powi(2);
    let x22 = x21*x6;
    let x23 = x4.sin();
    let x24 = x8.powi(2);
    let x25 = x23*x24;
    let x26 = 4.0*PI;
    let x27 = x7.cos();
    let x28 = x27 - 1.0;
    let x29 = x23*x28;
    let x30 = x2.cos();
    let x31 = x30 - 1.0;
    let x32 = x20*x31;
    let x33 = -x31;
    let x34 = x15*x23;
    let x35 = x23.powi(2);
    let x36 = x1*x35;
    let x37 = x28*x5;
    let x38 = x23*x8;
    let x39 = x15*x38;
    let x40 = x24*x32;
    [x0*x3*x9 + x1*x12*x23*(-x27*x33 - x28*x30) + x1*x22*x27*x29 + x1*x25*x30*x32*x6 - x10*x13*x8 - x14*x16*x17 - x16*x19*(3.0*x5 - 2.0) + x22*x25*x26, 2.0*PI*nu_r*x11*x8*(-x10*x30 + x33*x5) + 2.0*PI*x20*x28*x30*x31*x35*x8 + x0*x23*x28*x3 - 2.0*x13*x29 - x17*x27*x3*x34 - x19*x34*(3.0*x27 - 2.0) - x21*x26*x37*x9 - x21*x28*x36*x8, 2.0*PI*nu_r*x11*x3*(x10*x27 + x37) + 2.0*PI*x20*x27*x28*x3*x31*x35 + x0*x23*x31*x8 - 2.0*x12*x31*x38 - x14*x26*x40*x6 - x17*x30*x39 - x18*x39*(3.0*x30 - 2.0) - x3*x36*x40]
}

pub(crate) fn induction_source(x: f64, y: f64, z: f64, t: f64, prm: &ModelParams) -> [f64; 3] {
    let (nu, nu_r, mu, c0, ca, cd, s) = (prm.nu, prm.nu_r, prm.mu, prm.c0, prm.ca, prm.cd, prm.s);
    let _ = (nu, nu_r, mu, c0, ca, cd, s);
    let x0 = PI*z;
    let x1 = x0.cos();
    let x2 = t.sin();
    let x3 = x1*x2;
    let x4 = PI*y;
    let x5 = x4.cos();
    let x6 = PI*x;
    let x7 = x6.sin();
    let x8 = x5*x7;
    let x9 = x1*x8;
    let x10 = t.cos();
    let x11 = 3.0*PI.powi(2)*mu*x10;
    let x12 = 2.0*x6;
    let x13 = PI*x10.powi(2);
    let x14 = x13*x12.sin();
    let x15 = 2.0*x0;
    let x16 = x15.sin();
    let x17 = 2.0*x4;
    let x18 = x17.sin();
    let x19 = x16*x18;
    let x20 = 4.0*x9;
    let x21 = x1*x14;
    let x22 = x17.cos();
    let x23 = x22 - 1.0;
    let x24 = x16*x23;
    let x25 = x21*x24;
    let x26 = x4.sin();
    let x27 = x26*x7;
    let x28 = x15.cos();
    let x29 = x28 - 1.0;
    let x30 = x18*x29;
    let x31 = x0.sin();
    let x32 = x14*x31;
    let x33 = x30*x32;
    let x34 = x12.cos();
    let x35 = x13*(x34 - 1.0);
    let x36 = 2.0*x35;
    let x37 = x6.cos();
    let x38 = x26*x37;
    let x39 = x1*x38;
    let x40 = x22*x39;
    let x41 = x37*x5;
    let x42 = x31*x41;
    let x43 = x28*x42;
    let x44 = 2.0*x19;
    let x45 = x35*x44;
    let x46 = x1*x45;
    let x47 = x14*x44;
    let x48 = x13*x20*x34;
    let x49 = 2.0*x14;
    [2.0*x11*x9 + 2.0*x14*x19*x20 + 2.0*x16*x36*x40 + 2.0*x18*x36*x43 + 2.0*x25*x27 - 2.0*x3*x8 + 2.0*x33*x8 + 2.0*x41*x46, -x11*x39 - x23*x43*x49 + x24*x48 + x25*x41 + x27*x46 + x3*x38 - x33*x38 + x39*x47, -x11*x42 + x2*x42 + x21*x30*x41 - x24*x32*x38 - x29*x40*x49 + x30*x48 + x31*x45*x8 + x42*x47]
}

