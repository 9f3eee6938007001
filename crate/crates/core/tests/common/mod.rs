//! Random inputs and brute-force reference computations shared by the
//! integration tests. Nothing here calls into the library's numerics.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Well-conditioned SPD matrix.
pub fn random_spd(rng: &mut ChaCha8Rng, p: usize) -> DMatrix<f64> {
    let a = normal_matrix(rng, p, p);
    (&a * a.transpose()) / p as f64 + DMatrix::identity(p, p) * 0.5
}

/// PSD matrix of the given rank.
pub fn random_psd(rng: &mut ChaCha8Rng, p: usize, rank: usize) -> DMatrix<f64> {
    let a = normal_matrix(rng, p, rank);
    &a * a.transpose()
}

/// Haar-ish orthogonal matrix from Gram-Schmidt on a Gaussian matrix.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    gram_schmidt(&normal_matrix(rng, d, d))
}

pub fn gram_schmidt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut q = a.clone();
    for j in 0..q.ncols() {
        for k in 0..j {
            let proj = q.column(k).dot(&q.column(j));
            let qk = q.column(k).clone_owned();
            q.column_mut(j).axpy(-proj, &qk, 1.0);
        }
        let norm = q.column(j).norm();
        q.column_mut(j).scale_mut(1.0 / norm);
    }
    q
}

/// Predictors with a nonlinear response in the first two columns.
pub fn random_regression(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (DMatrix<f64>, DVector<f64>) {
    let x = normal_matrix(rng, n, p);
    let y = DVector::from_fn(n, |i, _| {
        let e: f64 = rng.sample(StandardNormal);
        x[(i, 0)] + 0.5 * x[(i, 1.min(p - 1))].powi(2) + 0.3 * e
    });
    (x, y)
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Cyclic Jacobi eigen-decomposition, eigenvalues sorted descending.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let p = a.nrows();
    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(p, p);
    for _ in 0..100 {
        let off: f64 = (0..p).flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for i in 0..p {
            for j in (i + 1)..p {
                if a[(i, j)].abs() < 1e-300 {
                    continue;
                }
                let tau = (a[(j, j)] - a[(i, i)]) / (2.0 * a[(i, j)]);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..p {
                    let (aki, akj) = (a[(k, i)], a[(k, j)]);
                    a[(k, i)] = c * aki - s * akj;
                    a[(k, j)] = s * aki + c * akj;
                }
                for k in 0..p {
                    let (aik, ajk) = (a[(i, k)], a[(j, k)]);
                    a[(i, k)] = c * aik - s * ajk;
                    a[(j, k)] = s * aik + c * ajk;
                }
                for k in 0..p {
                    let (vki, vkj) = (v[(k, i)], v[(k, j)]);
                    v[(k, i)] = c * vki - s * vkj;
                    v[(k, j)] = s * vki + c * vkj;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| a[(y, y)].total_cmp(&a[(x, x)]));
    let values = order.iter().map(|&k| a[(k, k)]).collect();
    let vectors = DMatrix::from_fn(p, p, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Lower Cholesky factor.
pub fn cholesky(a: &DMatrix<f64>) -> DMatrix<f64> {
    let p = a.nrows();
    let mut l = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum();
            if i == j {
                l[(i, i)] = (a[(i, i)] - s).sqrt();
            } else {
                l[(i, j)] = (a[(i, j)] - s) / l[(j, j)];
            }
        }
    }
    l
}

/// Inverse of a lower-triangular matrix by forward substitution.
pub fn lower_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let p = l.nrows();
    let mut inv = DMatrix::<f64>::zeros(p, p);
    for c in 0..p {
        for i in 0..p {
            let rhs = if i == c { 1.0 } else { 0.0 };
            let s: f64 = (0..i).map(|k| l[(i, k)] * inv[(k, c)]).sum();
            inv[(i, c)] = (rhs - s) / l[(i, i)];
        }
    }
    inv
}

/// Leading `d` generalized eigenvectors of `M δ = λ N δ` and all eigenvalues,
/// via `N = L Lᵀ` and the symmetric problem `L⁻¹ M L⁻ᵀ`.
pub fn generalized_eigen(m: &DMatrix<f64>, n: &DMatrix<f64>, d: usize) -> (Vec<f64>, DMatrix<f64>) {
    let li = lower_inverse(&cholesky(n));
    let c = &li * m * li.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let (vals, vecs) = jacobi_eigen(&c);
    let delta = li.transpose() * vecs.columns(0, d);
    (vals, delta)
}

/// Column-space distance `‖P_a − P_b‖₂` computed through Gram-Schmidt bases
/// and the Jacobi solver.
pub fn span_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = gram_schmidt(a);
    let qb = gram_schmidt(b);
    let diff = &qa * qa.transpose() - &qb * qb.transpose();
    let (vals, _) = jacobi_eigen(&(diff.transpose() * &diff));
    vals[0].max(0.0).sqrt()
}

/// Divisor-n covariance by explicit sums.
pub fn naive_cov(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = x.shape();
    let mean: Vec<f64> = (0..p).map(|j| (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64).collect();
    DMatrix::from_fn(p, p, |a, b| (0..n).map(|i| (x[(i, a)] - mean[a]) * (x[(i, b)] - mean[b])).sum::<f64>() / n as f64)
}

/// Equal-frequency slices of stably sorted `y`; the first `n mod h` slices get one extra row.
pub fn naive_slices(y: &DVector<f64>, h: usize) -> Vec<Vec<usize>> {
    let n = y.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    let (base, extra) = (n / h, n % h);
    let mut out = Vec::new();
    let mut pos = 0;
    for s in 0..h {
        let size = base + usize::from(s < extra);
        out.push(order[pos..pos + size].to_vec());
        pos += size;
    }
    out
}

/// Per-slice weight, mean of z and within-slice covariance of z, with
/// `z = L⁻¹(x − x̄)` for the Cholesky factor `L` of Σ.
struct ZSlices {
    l: DMatrix<f64>,
    sigma: DMatrix<f64>,
    slices: Vec<(f64, DVector<f64>, DMatrix<f64>)>,
}

fn z_slices(x: &DMatrix<f64>, y: &DVector<f64>, h: usize) -> ZSlices {
    let (n, p) = x.shape();
    let sigma = naive_cov(x);
    let l = cholesky(&sigma);
    let li = lower_inverse(&l);
    let mean = DVector::from_fn(p, |j, _| (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64);
    let z: Vec<DVector<f64>> = (0..n).map(|i| &li * (x.row(i).transpose() - &mean)).collect();
    let slices = naive_slices(y, h)
        .into_iter()
        .map(|rows| {
            let ns = rows.len() as f64;
            let mut b = DVector::zeros(p);
            for &i in &rows {
                b += &z[i];
            }
            b /= ns;
            let mut v = DMatrix::zeros(p, p);
            for &i in &rows {
                let c = &z[i] - &b;
                v += &c * c.transpose();
            }
            v /= ns;
            (ns / n as f64, b, v)
        })
        .collect();
    ZSlices { l, sigma, slices }
}

/// `Σ^{1/2} E[(I − var(z|s))²] Σ^{1/2}`, returned with `Σ`.
pub fn save_oracle(x: &DMatrix<f64>, y: &DVector<f64>, h: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let zs = z_slices(x, y, h);
    let p = x.ncols();
    let eye = DMatrix::<f64>::identity(p, p);
    let mut k = DMatrix::zeros(p, p);
    for (w, _, v) in &zs.slices {
        let a = &eye - v;
        k += (&a * &a) * *w;
    }
    (&zs.l * k * zs.l.transpose(), zs.sigma)
}

/// The six-term expansion of the directional-regression kernel:
/// `2 Σ^{1/2} {E[(V−I)²] + E[(V−I)bbᵀ] + E[bbᵀ(V−I)] + E[(bbᵀ)²] + E²[bbᵀ] + E[bᵀb] E[bbᵀ]} Σ^{1/2}`
/// with `V = var(z|s)` and `b = E(z|s)`.
pub fn dr_six_term_oracle(x: &DMatrix<f64>, y: &DVector<f64>, h: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let zs = z_slices(x, y, h);
    let p = x.ncols();
    let eye = DMatrix::<f64>::identity(p, p);
    let e = |f: &dyn Fn(&DVector<f64>, &DMatrix<f64>) -> DMatrix<f64>| {
        zs.slices.iter().fold(DMatrix::zeros(p, p), |acc, (w, b, v)| acc + f(b, v) * *w)
    };
    let m1 = e(&|_, v| (v - &eye) * (v - &eye));
    let m2 = e(&|b, v| (v - &eye) * b * b.transpose());
    let m3 = e(&|b, v| b * b.transpose() * (v - &eye));
    let m4 = e(&|b, _| (b * b.transpose()) * (b * b.transpose()));
    let ebb = e(&|b, _| b * b.transpose());
    let m5 = &ebb * &ebb;
    let ebtb: f64 = zs.slices.iter().map(|(w, b, _)| w * b.norm_squared()).sum();
    let m6 = &ebb * ebtb;
    let k = (m1 + m2 + m3 + m4 + m5 + m6) * 2.0;
    (&zs.l * k * zs.l.transpose(), zs.sigma)
}
