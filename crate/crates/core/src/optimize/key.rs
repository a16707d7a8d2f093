use num_complex::Complex;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::quantum::{Measurement, QuantumRealization, ANALYTIC_TOL};
use crate::rates::h_ab_of_table;

use super::{multistart_maximize, start_rng, SearchOptions, SearchResult};

/// Orthonormal basis whose consecutive column groups span the effects of a
/// projective measurement, together with the group sizes.
fn effect_basis(m: &Measurement<f64>) -> Result<(CMatrix<f64>, Vec<usize>)> {
    if !m.is_projective() {
        return Err(Error::InvalidArgument("key measurement search needs a projective measurement".into()));
    }
    let d = m.dim();
    let mut cols: Vec<Vec<Complex<f64>>> = Vec::with_capacity(d);
    let mut sizes = Vec::with_capacity(m.outcome_count());
    for e in m.effects() {
        let rank = e.trace().re.round() as usize;
        let start = cols.len();
        for j in 0..d {
            if cols.len() - start == rank {
                break;
            }
            let mut v: Vec<Complex<f64>> = (0..d).map(|i| e[(i, j)]).collect();
            for c in &cols {
                let proj: Complex<f64> = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= proj * ci;
                }
            }
            let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if n > 1e-6 {
                cols.push(v.iter().map(|z| z / n).collect());
            }
        }
        if cols.len() - start != rank {
            return Err(Error::InvalidArgument("effect rank could not be resolved".into()));
        }
        sizes.push(rank);
    }
    if cols.len() != d {
        return Err(Error::InvalidArgument("effect ranks do not add up to the dimension".into()));
    }
    Ok((CMatrix::from_fn(d, d, |i, j| cols[j][i]), sizes))
}

/// Hermitian matrix from `d^2` reals: diagonal, then real and imaginary
/// parts of the strict upper triangle.
fn hermitian(d: usize, x: &[f64]) -> CMatrix<f64> {
    let mut h = CMatrix::zeros(d, d);
    let mut k = d;
    for i in 0..d {
        h[(i, i)] = Complex::new(x[i], 0.0);
        for j in i + 1..d {
            let z = Complex::new(x[k], x[k + 1]);
            k += 2;
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    h
}

/// Bob's key measurement in the ansatz `U = U0 exp(i H(x))`: projectors
/// onto column groups of `U`, where `U0` diagonalises the transpose of
/// Alice's key measurement. `x = 0` gives that transpose.
pub fn key_measurement_from_params(alice_key: &Measurement<f64>, x: &[f64]) -> Result<Measurement<f64>> {
    let reference = alice_key.transpose();
    let (u0, sizes) = effect_basis(&reference)?;
    let d = u0.rows();
    if x.len() != d * d {
        return Err(Error::Dimension(format!("{} parameters, expected {}", x.len(), d * d)));
    }
    let u = u0.matmul(&hermitian(d, x).exp_i_hermitian());
    let mut effects = Vec::with_capacity(sizes.len());
    let mut col = 0;
    for s in sizes {
        let mut e = CMatrix::zeros(d, d);
        for j in col..col + s {
            let v: Vec<Complex<f64>> = (0..d).map(|i| u[(i, j)]).collect();
            e = &e + &CMatrix::outer(&v, &v);
        }
        effects.push(e);
        col += s;
    }
    Measurement::new(effects, 1e3 * ANALYTIC_TOL)
}

#[derive(Clone, Debug)]
pub struct KeyMeasurementSearch {
    pub measurement: Measurement<f64>,
    pub h_ab: f64,
    /// `H(A|B)` with the transpose measurement.
    pub default_h_ab: f64,
    pub search: SearchResult,
}

/// Minimises `H(A_key | B)` over Bob's key measurement. Start 0 is the
/// transpose of Alice's key measurement; the rest are seeded draws.
pub fn optimize_key_measurement(
    q: &QuantumRealization<f64>,
    key_input: usize,
    opts: &SearchOptions,
) -> Result<KeyMeasurementSearch> {
    let alice_key = q
        .alice()
        .get(key_input)
        .ok_or_else(|| Error::Index(format!("key input {} of {}", key_input + 1, q.alice().len())))?;
    let d = alice_key.dim();
    let objective = |x: &[f64]| -> f64 {
        let run = || -> Result<f64> {
            let mb = key_measurement_from_params(alice_key, x)?;
            h_ab_of_table(&q.joint_distribution(alice_key, &mb))
        };
        run().map(|h| -h).unwrap_or(f64::NEG_INFINITY)
    };
    let mut starts = vec![vec![0.0; d * d]];
    for k in 1..opts.starts.max(1) {
        let mut rng = start_rng(opts.seed, k);
        starts.push((0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    let search = multistart_maximize(&objective, &starts, opts)?;
    Ok(KeyMeasurementSearch {
        measurement: key_measurement_from_params(alice_key, &search.params)?,
        h_ab: -search.value,
        default_h_ab: -search.starts[0].initial_value,
        search,
    })
}
