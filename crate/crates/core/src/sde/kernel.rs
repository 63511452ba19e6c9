//! Allocation-free step kernels on row-major dense matrices.

use crate::qcore::C64;

const MINUS_I: C64 = C64::new(0.0, -1.0);

/// Taylor terms below this fraction of the running sum are dropped.
const TAYLOR_CUTOFF: f64 = 1e-32;
const TAYLOR_MAX_TERMS: usize = 60;

/// Scratch buffers for one worker.
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    dim: usize,
    generator: Vec<C64>,
    term: Vec<C64>,
    next: Vec<C64>,
    acc: Vec<C64>,
}

impl Workspace {
    pub(crate) fn new(dim: usize) -> Self {
        Workspace {
            dim,
            generator: vec![C64::default(); dim * dim],
            term: vec![C64::default(); dim],
            next: vec![C64::default(); dim],
            acc: vec![C64::default(); dim],
        }
    }
}

#[inline]
fn matvec(dim: usize, m: &[C64], v: &[C64], out: &mut [C64]) {
    for (row, o) in m.chunks_exact(dim).zip(out.iter_mut()) {
        let mut s = C64::default();
        for (a, b) in row.iter().zip(v) {
            s += a * b;
        }
        *o = s;
    }
}

/// `psi <- exp(-i (h_dt + sum_j dw_j * noise_j)) psi`.
///
/// `norm_bound` must bound the max-row-sum norm of the exponent; it fixes
/// how many Taylor substeps are taken.
pub(crate) fn unitary_step(
    h_dt: &[C64],
    noise: &[Vec<C64>],
    dws: &[f64],
    norm_bound: f64,
    psi: &mut [C64],
    ws: &mut Workspace,
) {
    match ws.dim {
        2 => unitary_step_fixed::<2>(h_dt, noise, dws, norm_bound, psi),
        4 => unitary_step_fixed::<4>(h_dt, noise, dws, norm_bound, psi),
        8 => unitary_step_fixed::<8>(h_dt, noise, dws, norm_bound, psi),
        _ => unitary_step_dyn(h_dt, noise, dws, norm_bound, psi, ws),
    }
}

fn substeps(norm_bound: f64) -> usize {
    norm_bound.ceil().max(1.0) as usize
}

fn unitary_step_dyn(
    h_dt: &[C64],
    noise: &[Vec<C64>],
    dws: &[f64],
    norm_bound: f64,
    psi: &mut [C64],
    ws: &mut Workspace,
) {
    let dim = ws.dim;
    ws.generator.copy_from_slice(h_dt);
    for (b, &dw) in noise.iter().zip(dws) {
        for (g, x) in ws.generator.iter_mut().zip(b) {
            *g += x * dw;
        }
    }
    let n = substeps(norm_bound);
    let inv = 1.0 / n as f64;
    for _ in 0..n {
        taylor_action(dim, &ws.generator, inv, psi, &mut ws.term, &mut ws.next, &mut ws.acc);
    }
}

fn unitary_step_fixed<const D: usize>(h_dt: &[C64], noise: &[Vec<C64>], dws: &[f64], norm_bound: f64, psi: &mut [C64]) {
    // Split real and imaginary parts so the fixed-size loops vectorize.
    let mut are = [[0.0; D]; D];
    let mut aim = [[0.0; D]; D];
    for r in 0..D {
        for c in 0..D {
            let z = h_dt[r * D + c];
            are[r][c] = z.re;
            aim[r][c] = z.im;
        }
    }
    for (b, &dw) in noise.iter().zip(dws) {
        for r in 0..D {
            for c in 0..D {
                let z = b[r * D + c];
                are[r][c] += z.re * dw;
                aim[r][c] += z.im * dw;
            }
        }
    }
    let mut vre = [0.0; D];
    let mut vim = [0.0; D];
    for (k, z) in psi.iter().enumerate() {
        vre[k] = z.re;
        vim[k] = z.im;
    }
    let n = substeps(norm_bound);
    let inv = 1.0 / n as f64;
    for _ in 0..n {
        taylor_fixed(&are, &aim, inv, &mut vre, &mut vim);
    }
    for (k, z) in psi.iter_mut().enumerate() {
        *z = C64::new(vre[k], vim[k]);
    }
}

#[inline(always)]
fn taylor_fixed<const D: usize>(
    are: &[[f64; D]; D],
    aim: &[[f64; D]; D],
    scale: f64,
    vre: &mut [f64; D],
    vim: &mut [f64; D],
) {
    let total: f64 = (0..D).map(|k| vre[k] * vre[k] + vim[k] * vim[k]).sum();
    let (mut tre, mut tim) = (*vre, *vim);
    for k in 1..=TAYLOR_MAX_TERMS {
        let f = scale / k as f64;
        let mut nre = [0.0; D];
        let mut nim = [0.0; D];
        for r in 0..D {
            let (mut sre, mut sim) = (0.0, 0.0);
            for c in 0..D {
                sre += are[r][c] * tre[c] - aim[r][c] * tim[c];
                sim += are[r][c] * tim[c] + aim[r][c] * tre[c];
            }
            // multiply by -i f
            nre[r] = sim * f;
            nim[r] = -sre * f;
        }
        let mut size = 0.0;
        for r in 0..D {
            vre[r] += nre[r];
            vim[r] += nim[r];
            size += nre[r] * nre[r] + nim[r] * nim[r];
        }
        tre = nre;
        tim = nim;
        if size <= TAYLOR_CUTOFF * total {
            break;
        }
    }
}

/// `psi <- exp(-i * scale * a) psi` by a Taylor series truncated at machine
/// precision; requires `scale * |a| <= 1`.
fn taylor_action(
    dim: usize,
    a: &[C64],
    scale: f64,
    psi: &mut [C64],
    term: &mut Vec<C64>,
    next: &mut Vec<C64>,
    acc: &mut [C64],
) {
    term.copy_from_slice(psi);
    acc.copy_from_slice(psi);
    let total: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    for k in 1..=TAYLOR_MAX_TERMS {
        matvec(dim, a, term, next);
        let f = MINUS_I * (scale / k as f64);
        let mut size = 0.0;
        for (n, s) in next.iter_mut().zip(acc.iter_mut()) {
            *n *= f;
            *s += *n;
            size += n.norm_sqr();
        }
        std::mem::swap(term, next);
        if size <= TAYLOR_CUTOFF * total {
            break;
        }
    }
    psi.copy_from_slice(acc);
}

/// Max-row-sum norm of a row-major square matrix.
pub(crate) fn row_sum_norm(dim: usize, m: &[C64]) -> f64 {
    m.chunks_exact(dim).map(|r| r.iter().map(|z| z.re.abs() + z.im.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Raw Ito update
/// `psi <- psi - (i h + sum_j gamma_j^2 / 2) psi dt - i sum_j noise_j psi dw_j`.
pub(crate) fn euler_maruyama_step(
    h: &[C64],
    half_gamma_sq: f64,
    noise: &[Vec<C64>],
    dt: f64,
    dws: &[f64],
    psi: &mut [C64],
    ws: &mut Workspace,
) {
    let dim = ws.dim;
    // acc = -i h psi dt - half_gamma_sq psi dt
    matvec(dim, h, psi, &mut ws.acc);
    for (a, p) in ws.acc.iter_mut().zip(psi.iter()) {
        *a = MINUS_I * *a * dt - p * (half_gamma_sq * dt);
    }
    for (b, &dw) in noise.iter().zip(dws) {
        matvec(dim, b, psi, &mut ws.next);
        for (a, n) in ws.acc.iter_mut().zip(&ws.next) {
            *a += MINUS_I * n * dw;
        }
    }
    for (p, a) in psi.iter_mut().zip(&ws.acc) {
        *p += a;
    }
}
