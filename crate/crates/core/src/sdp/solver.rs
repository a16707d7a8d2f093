//! Infeasible primal-dual path following with the HKM search direction and a
//! Mehrotra predictor-corrector step.
//!
//! Internally the problem is rewritten as
//!
//! ```text
//! min  C . X   s.t.  A_i . X = b_i,  X psd
//! max  b^T y   s.t.  sum_i y_i A_i + Z = C,  Z psd
//! ```
//!
//! with `C = -F_0`, `A_i = -F_i`, `b = -c`, so that `y` is the SDPA vector `x`,
//! `Z` its slack and `X` the SDPA dual matrix `Y`.

use crate::error::{Error, Result};
use faer::dyn_stack::{MemBuffer, MemStack, StackReq};
use faer::linalg::cholesky::llt;
use faer::Par;

use crate::linalg::dense::{axpy, dot};
use crate::linalg::Mat;
use crate::real::Real;

use super::problem::{BlockSdp, SdpSolution, Status};

/// Largest accepted sum of block sides.
pub const DEFAULT_MAX_SIDE: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iterations: usize,
    pub max_side: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            gap_tol: 1e-7,
            feas_tol: 1e-8,
            max_iterations: 200,
            max_side: DEFAULT_MAX_SIDE,
        }
    }
}

struct Group<T> {
    var: usize,
    entries: Vec<(usize, usize, T)>,
}

struct Block<T> {
    n: usize,
    groups: Vec<Group<T>>,
    c: Mat<T>,
}

struct Data<T> {
    m: usize,
    blocks: Vec<Block<T>>,
    b: Vec<T>,
}

impl<T: Real> Data<T> {
    fn new(sdp: &BlockSdp<T>) -> Self {
        let m = sdp.variable_count();
        let mut blocks: Vec<Block<T>> = sdp
            .block_sizes()
            .iter()
            .map(|s| {
                let n = s.unsigned_abs();
                Block {
                    n,
                    groups: Vec::new(),
                    c: Mat::zeros(n, n),
                }
            })
            .collect();
        for e in sdp.entries() {
            let blk = &mut blocks[e.block];
            let v = -e.value;
            if e.matrix == 0 {
                blk.c[(e.row, e.col)] = v;
                blk.c[(e.col, e.row)] = v;
                continue;
            }
            let var = e.matrix - 1;
            match blk.groups.last_mut() {
                Some(g) if g.var == var => g.entries.push((e.row, e.col, v)),
                _ => blk.groups.push(Group {
                    var,
                    entries: vec![(e.row, e.col, v)],
                }),
            }
        }
        Data {
            m,
            blocks,
            b: sdp.objective().iter().map(|&c| -c).collect(),
        }
    }

    /// `(A_i . V)_i` for block-diagonal symmetric `V`.
    fn apply(&self, v: &[Mat<T>]) -> Vec<T> {
        let mut out = vec![T::zero(); self.m];
        for (blk, vb) in self.blocks.iter().zip(v) {
            for g in &blk.groups {
                let mut s = T::zero();
                for &(q, r, a) in &g.entries {
                    s += if q == r {
                        a * vb[(q, q)]
                    } else {
                        a * (vb[(q, r)] + vb[(r, q)])
                    };
                }
                out[g.var] += s;
            }
        }
        out
    }

    /// `sum_i y_i A_i`
    fn combine(&self, y: &[T]) -> Vec<Mat<T>> {
        self.blocks
            .iter()
            .map(|blk| {
                let mut out = Mat::zeros(blk.n, blk.n);
                for g in &blk.groups {
                    let w = y[g.var];
                    for &(q, r, a) in &g.entries {
                        out[(q, r)] += a * w;
                        if q != r {
                            out[(r, q)] += a * w;
                        }
                    }
                }
                out
            })
            .collect()
    }

    /// Adds the least-norm `sum_i u_i A_i` to `dx` so that `A(dx) = target`,
    /// by conjugate gradients on `A A^*`.
    fn correct(&self, dx: &mut [Mat<T>], target: &[T]) {
        let ad = self.apply(dx);
        let mut r: Vec<T> = target.iter().zip(&ad).map(|(&t, &a)| t - a).collect();
        let r0 = vnorm(&r);
        if r0 == T::zero() {
            return;
        }
        let mut u = vec![T::zero(); self.m];
        let mut p = r.clone();
        let mut rr = dot(&r, &r);
        for _ in 0..100 {
            let gp = self.apply(&self.combine(&p));
            let pgp = dot(&p, &gp);
            if !(pgp > T::zero()) {
                break;
            }
            let alpha = rr / pgp;
            axpy(alpha, &p, &mut u);
            axpy(-alpha, &gp, &mut r);
            let rr_new = dot(&r, &r);
            if rr_new.sqrt() <= T::of(1e-12) * r0 {
                break;
            }
            let beta = rr_new / rr;
            for (pi, &ri) in p.iter_mut().zip(&r) {
                *pi = ri + beta * *pi;
            }
            rr = rr_new;
        }
        for (d, c) in dx.iter_mut().zip(self.combine(&u)) {
            *d = d.add(&c);
        }
    }

    /// Schur complement `M_ij = tr(A_i X A_j W)`.
    fn schur(&self, x: &[Mat<T>], w: &[Mat<T>]) -> faer::Mat<f64> {
        let mut m = faer::Mat::<f64>::zeros(self.m, self.m);
        for ((blk, xb), wb) in self.blocks.iter().zip(x).zip(w) {
            for (gi, g) in blk.groups.iter().enumerate() {
                for h in &blk.groups[gi..] {
                    let mut s = T::zero();
                    for &(q, r, a) in &g.entries {
                        for &(sr, p, c) in &h.entries {
                            let mut t = xb[(r, sr)] * wb[(p, q)]
                                + xb[(r, p)] * wb[(sr, q)]
                                + xb[(q, sr)] * wb[(p, r)]
                                + xb[(q, p)] * wb[(sr, r)];
                            if q == r {
                                t *= T::half();
                            }
                            if sr == p {
                                t *= T::half();
                            }
                            s += a * c * t;
                        }
                    }
                    m[(g.var.min(h.var), g.var.max(h.var))] += s.f64();
                }
            }
        }
        for i in 0..self.m {
            for j in 0..i {
                m[(i, j)] = m[(j, i)];
            }
        }
        m
    }
}

fn inner<T: Real>(a: &[Mat<T>], b: &[Mat<T>]) -> T {
    a.iter().zip(b).map(|(x, y)| x.inner(y)).sum()
}

fn norm<T: Real>(a: &[Mat<T>]) -> T {
    inner(a, a).sqrt()
}

fn vnorm<T: Real>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

fn sub_all<T: Real>(a: &[Mat<T>], b: &[Mat<T>]) -> Vec<Mat<T>> {
    a.iter().zip(b).map(|(x, y)| x.sub(y)).collect()
}

/// Largest `alpha <= 1` keeping `X + alpha dX` psd, given `L L^T = X`.
fn max_step<T: Real>(chol: &[Mat<T>], dx: &[Mat<T>]) -> T {
    let mut alpha = T::one();
    for (l, d) in chol.iter().zip(dx) {
        let li = l.lower_inverse();
        let mut s = li.matmul(d).matmul_t(&li);
        s.symmetrize_in_place();
        let lam = s.min_eigenvalue();
        if lam < T::zero() {
            alpha = alpha.min(-T::one() / lam);
        }
    }
    alpha
}

fn cholesky_all<T: Real>(a: &[Mat<T>]) -> Option<Vec<Mat<T>>> {
    a.iter().map(|m| m.cholesky()).collect()
}

/// Schur complement factored in place, kept in `f64` whatever the scalar
/// type. `packed` holds the original upper triangle column by column.
struct Schur {
    factor: faer::Mat<f64>,
    packed: Vec<f64>,
}

impl Schur {
    /// Cholesky factorization, adding a growing diagonal shift when `m` is
    /// not numerically positive definite.
    fn factor(mut a: faer::Mat<f64>) -> Option<Self> {
        let n = a.nrows();
        let mut packed = Vec::with_capacity(n * (n + 1) / 2);
        for j in 0..n {
            packed.extend_from_slice(&a.col(j).try_as_col_major().expect("contiguous").as_slice()[..=j]);
        }
        let scale = (0..n).map(|i| a[(i, i)].abs()).fold(1.0, f64::max);
        let mut buf = MemBuffer::new(llt::factor::cholesky_in_place_scratch::<f64>(n, Par::Seq, Default::default()));
        let mut shift = 0.0;
        for attempt in 0..9 {
            if attempt > 0 {
                shift = if attempt == 1 { scale * f64::EPSILON * 1e3 } else { shift * 100.0 };
                for j in 0..n {
                    let col = &packed[j * (j + 1) / 2..];
                    for i in 0..j {
                        a[(j, i)] = col[i];
                    }
                    a[(j, j)] = col[j] + shift;
                }
            }
            let ok = llt::factor::cholesky_in_place(
                a.as_mut(),
                Default::default(),
                Par::Seq,
                MemStack::new(&mut buf),
                Default::default(),
            )
            .is_ok();
            if ok {
                return Some(Schur { factor: a, packed });
            }
        }
        None
    }

    fn apply_original(&self, v: &faer::Col<f64>) -> faer::Col<f64> {
        let n = v.nrows();
        let mut out = faer::Col::<f64>::zeros(n);
        for j in 0..n {
            let col = &self.packed[j * (j + 1) / 2..][..=j];
            let vj = v[j];
            let mut acc = 0.0;
            for i in 0..j {
                out[i] += col[i] * vj;
                acc += col[i] * v[i];
            }
            out[j] += acc + col[j] * vj;
        }
        out
    }

    fn solve_factor(&self, rhs: &faer::Col<f64>) -> faer::Col<f64> {
        let mut v = rhs.clone();
        llt::solve::solve_in_place(
            self.factor.as_ref(),
            v.as_mat_mut(),
            Par::Seq,
            MemStack::new(&mut MemBuffer::new(StackReq::EMPTY)),
        );
        v
    }

    /// Cholesky solve followed by a few rounds of iterative refinement
    /// against the unshifted matrix.
    fn solve<T: Real>(&self, r: &[T]) -> Vec<T> {
        let n = r.len();
        let rhs = faer::Col::<f64>::from_fn(n, |i| r[i].f64());
        let mut v = self.solve_factor(&rhs);
        let r_norm = rhs.norm_l2();
        let mut best = f64::INFINITY;
        for _ in 0..4 {
            let res = &rhs - self.apply_original(&v);
            let res_norm = res.norm_l2();
            if !(res_norm < best) || res_norm <= r_norm * f64::EPSILON * 10.0 {
                break;
            }
            best = res_norm;
            v += self.solve_factor(&res);
        }
        (0..n).map(|i| T::of(v[i])).collect()
    }
}

struct Direction<T> {
    dx: Vec<Mat<T>>,
    dy: Vec<T>,
    dz: Vec<Mat<T>>,
}

/// Solves `sdp` to the tolerances in `opts`.
pub fn solve<T: Real>(sdp: &BlockSdp<T>, opts: &SolverOptions) -> Result<SdpSolution<T>> {
    let side = sdp.total_side();
    if side > opts.max_side {
        return Err(Error::TooLarge {
            what: "total block side",
            count: side,
            cap: opts.max_side,
            hint: "export the problem in SDPA format and use an external solver",
        });
    }
    let data = Data::new(sdp);
    let m = data.m;
    let n_total = T::of_usize(side.max(1));
    let gap_tol = T::tol(opts.gap_tol);
    let feas_tol = T::tol(opts.feas_tol);

    let c_norm = data.blocks.iter().map(|b| b.c.norm_fro()).fold(T::zero(), |a, b| (a * a + b * b).sqrt());
    let b_norm = vnorm(&data.b);
    let c_mats: Vec<Mat<T>> = data.blocks.iter().map(|b| b.c.clone()).collect();

    // size of each A_i
    let mut a_norms = vec![T::zero(); m];
    for blk in &data.blocks {
        for g in &blk.groups {
            for &(q, r, a) in &g.entries {
                a_norms[g.var] += if q == r { a * a } else { T::two() * a * a };
            }
        }
    }
    let sqrt_n = n_total.sqrt();
    let ten = T::of(10.0);
    let mut xi = ten.max(sqrt_n);
    let mut zeta = ten.max(sqrt_n).max(c_norm);
    for i in 0..m {
        let an = a_norms[i].sqrt();
        xi = xi.max(n_total * (T::one() + data.b[i].abs()) / (T::one() + an));
        zeta = zeta.max(an);
    }

    let mut x: Vec<Mat<T>> = data.blocks.iter().map(|b| Mat::scaled_identity(b.n, xi)).collect();
    let mut z: Vec<Mat<T>> = data.blocks.iter().map(|b| Mat::scaled_identity(b.n, zeta)).collect();
    let mut y = vec![T::zero(); m];

    let mut status = Status::MaxIterations;
    let mut iterations = 0;
    let mut report = Residuals {
        pobj: T::zero(),
        dobj: T::zero(),
        gap: T::infinity(),
        pinf: T::infinity(),
        dinf: T::infinity(),
    };

    for iter in 0..=opts.max_iterations {
        iterations = iter;
        let ax = data.apply(&x);
        let rp: Vec<T> = data.b.iter().zip(&ax).map(|(&b, &a)| b - a).collect();
        let ay = data.combine(&y);
        let rd: Vec<Mat<T>> = c_mats
            .iter()
            .zip(&ay)
            .zip(&z)
            .map(|((c, a), z)| c.sub(a).sub(z))
            .collect();
        let pobj = inner(&c_mats, &x);
        let dobj = dot(&data.b, &y);
        report = Residuals {
            pobj,
            dobj,
            gap: (pobj - dobj).abs() / T::one().max((pobj.abs() + dobj.abs()) * T::half()),
            pinf: vnorm(&rp) / (T::one() + b_norm),
            dinf: norm(&rd) / (T::one() + c_norm),
        };
        if !report.is_finite() {
            status = Status::NumericalFailure;
            break;
        }
        if report.gap <= gap_tol && report.pinf <= feas_tol && report.dinf <= feas_tol {
            status = Status::Optimal;
            break;
        }
        // certificates
        let x_norm = norm(&x);
        if pobj < T::zero() && x_norm > T::of(1e6) {
            let ratio = vnorm(&ax) / (-pobj);
            if ratio < feas_tol {
                status = Status::Infeasible;
                break;
            }
        }
        if dobj > T::zero() && vnorm(&y) > T::of(1e6) {
            let resid: Vec<Mat<T>> = ay.iter().zip(&z).map(|(a, z)| a.add(z)).collect();
            if norm(&resid) / dobj < feas_tol {
                status = Status::Unbounded;
                break;
            }
        }
        if iter == opts.max_iterations {
            break;
        }

        let Some(zchol) = cholesky_all(&z) else {
            status = Status::NumericalFailure;
            break;
        };
        let Some(xchol) = cholesky_all(&x) else {
            status = Status::NumericalFailure;
            break;
        };
        let w: Vec<Mat<T>> = zchol
            .iter()
            .map(|l| {
                let mut w = l.cholesky_inverse();
                w.symmetrize_in_place();
                w
            })
            .collect();
        let schur = data.schur(&x, &w);
        let Some(mchol) = Schur::factor(schur) else {
            status = Status::NumericalFailure;
            break;
        };
        let mu = inner(&x, &z) / n_total;
        let xrdw: Vec<Mat<T>> = x
            .iter()
            .zip(&rd)
            .zip(&w)
            .map(|((x, r), w)| x.matmul(r).matmul(w))
            .collect();
        let a_xrdw = data.apply(&xrdw);

        // predictor
        let rhs: Vec<T> = (0..m).map(|i| data.b[i] + a_xrdw[i]).collect();
        let frame = Frame {
            data: &data,
            schur: &mchol,
            x: &x,
            w: &w,
            rd: &rd,
            rp: &rp,
        };
        let pred = frame.direction(&rhs, T::zero(), None);
        let ap = max_step(&xchol, &pred.dx);
        let ad = max_step(&zchol, &pred.dz);
        let mut xa_z = T::zero();
        for k in 0..x.len() {
            let xs = x[k].add(&pred.dx[k].scale(ap));
            let zs = z[k].add(&pred.dz[k].scale(ad));
            xa_z += xs.inner(&zs);
        }
        let mu_aff = xa_z / n_total;
        let ratio = (mu_aff / mu).max(T::zero()).min(T::one());
        let sigma = ratio * ratio * ratio;

        // corrector
        let second: Vec<Mat<T>> = (0..x.len())
            .map(|k| pred.dx[k].matmul(&pred.dz[k]).matmul(&w[k]))
            .collect();
        let a_w = data.apply(&w);
        let a_second = data.apply(&second);
        let rhs: Vec<T> = (0..m)
            .map(|i| data.b[i] - sigma * mu * a_w[i] + a_xrdw[i] + a_second[i])
            .collect();
        let corr = frame.direction(&rhs, sigma * mu, Some(&second));
        let ap = max_step(&xchol, &corr.dx);
        let ad = max_step(&zchol, &corr.dz);
        let gamma = T::of(0.9) + T::of(0.09) * ap.min(ad);
        let ap = (gamma * ap).min(T::one());
        let ad = (gamma * ad).min(T::one());
        if ap < T::of(1e-12) && ad < T::of(1e-12) {
            status = Status::NumericalFailure;
            break;
        }
        for k in 0..x.len() {
            x[k].add_assign_scaled(ap, &corr.dx[k]);
            z[k].add_assign_scaled(ad, &corr.dz[k]);
            x[k].symmetrize_in_place();
            z[k].symmetrize_in_place();
        }
        for (yi, d) in y.iter_mut().zip(&corr.dy) {
            *yi += ad * *d;
        }
    }

    let x_out: Vec<T> = y.clone();
    Ok(SdpSolution {
        status,
        primal_objective: -report.dobj,
        dual_objective: -report.pobj,
        relative_gap: report.gap,
        dual_infeasibility: report.pinf,
        primal_infeasibility: report.dinf,
        x: x_out,
        primal_matrix: sdp.slack(&y),
        dual_matrix: x,
        iterations,
    })
}

#[derive(Clone, Copy)]
struct Residuals<T> {
    pobj: T,
    dobj: T,
    gap: T,
    pinf: T,
    dinf: T,
}

impl<T: Real> Residuals<T> {
    fn is_finite(&self) -> bool {
        self.pobj.is_finite() && self.dobj.is_finite() && self.pinf.is_finite() && self.dinf.is_finite()
    }
}

/// Quantities shared by the predictor and corrector solves.
struct Frame<'a, T> {
    data: &'a Data<T>,
    schur: &'a Schur,
    x: &'a [Mat<T>],
    w: &'a [Mat<T>],
    rd: &'a [Mat<T>],
    rp: &'a [T],
}

impl<T: Real> Frame<'_, T> {
    fn direction(&self, rhs: &[T], target: T, second: Option<&[Mat<T>]>) -> Direction<T> {
        let (data, x, w) = (self.data, self.x, self.w);
        let dy = self.schur.solve(rhs);
        let ady = data.combine(&dy);
        let dz = sub_all(self.rd, &ady);
        let mut dx: Vec<Mat<T>> = (0..x.len())
            .map(|k| {
                let mut d = w[k].scale(target).sub(&x[k]).sub(&x[k].matmul(&dz[k]).matmul(&w[k]));
                if let Some(s) = second {
                    d = d.sub(&s[k]);
                }
                d.symmetrize_in_place();
                d
            })
            .collect();
        data.correct(&mut dx, self.rp);
        Direction { dx, dy, dz }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schur_solve_recovers_solution() {
        let n = 150;
        let b = faer::Mat::<f64>::from_fn(n, n, |i, j| ((i * 7 + j * 13) % 17) as f64 / 17.0 - 0.5);
        let mut m = &b * b.transpose();
        for i in 0..n {
            m[(i, i)] += 1.0;
        }
        let want: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let wc = faer::Col::<f64>::from_fn(n, |i| want[i]);
        let rhs_col = &m * &wc;
        let rhs: Vec<f64> = (0..n).map(|i| rhs_col[i]).collect();
        let schur = Schur::factor(m.clone()).unwrap();
        let got = schur.solve(&rhs);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-10);
        }
    }

    #[test]
    fn schur_shifts_singular_matrix() {
        let m = faer::Mat::<f64>::from_fn(3, 3, |_, _| 1.0);
        assert!(Schur::factor(m).is_some());
    }
}
