//! Abstract Deligne-Malgrange-Stokes filtrations of exponential type.
//!
//! For exponents c_1..c_m the growth rates along the ray of angle φ are
//! Re(c_k e^{-iφ}); they reorder exactly at the Stokes directions
//! φ = Arg(c_a − c_b) − π/2.  Crossing a direction reverses maximal blocks of
//! consecutive labels, and a valid filtration must match steps off the
//! blocks, match the top of each block, and be opposed on each block's
//! quotient.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::quantum::{exponent_eigenvalues_with_tol, MeromorphicConnection};

type C64 = Complex64;

const ANGLE_TOL: f64 = 1e-10;

/// Distinct exponents c_1..c_m (the eigenvalues of A_{-2}).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExponentSet {
    #[serde(with = "crate::wire::complex_vec")]
    exponents: Vec<C64>,
}

impl ExponentSet {
    pub fn new(exponents: Vec<C64>) -> Result<Self> {
        Self::with_tolerance(exponents, 1e-8)
    }

    pub fn with_tolerance(exponents: Vec<C64>, tol: f64) -> Result<Self> {
        if exponents.is_empty() {
            return Err(Error::usage("exponent set must be nonempty"));
        }
        for i in 0..exponents.len() {
            for j in (i + 1)..exponents.len() {
                if (exponents[i] - exponents[j]).norm() <= tol {
                    return Err(Error::usage(format!(
                        "exponents {} and {} closer than tolerance; merge refused",
                        exponents[i], exponents[j]
                    )));
                }
            }
        }
        Ok(ExponentSet { exponents })
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self) -> &[C64] {
        &self.exponents
    }

    /// Growth rates Re(c_k e^{-iφ}) at angle φ.
    fn rates(&self, phi: f64) -> Vec<f64> {
        let rot = C64::from_polar(1.0, -phi);
        self.exponents.iter().map(|c| (c * rot).re).collect()
    }

    /// Label order at angle φ: exponent indices sorted by increasing rate.
    /// Refuses ties (non-generic angle).
    pub fn order_at(&self, phi: f64) -> Result<Vec<usize>> {
        let rates = self.rates(phi);
        let mut idx: Vec<usize> = (0..rates.len()).collect();
        idx.sort_by(|&a, &b| rates[a].partial_cmp(&rates[b]).expect("finite rates"));
        let scale = self
            .exponents
            .iter()
            .map(|c| c.norm())
            .fold(1.0f64, f64::max);
        for w in idx.windows(2) {
            if (rates[w[0]] - rates[w[1]]).abs() < 1e-12 * scale {
                return Err(Error::usage(format!(
                    "equal growth rates at angle {phi}: non-generic configuration refused"
                )));
            }
        }
        Ok(idx)
    }
}

/// One open arc between consecutive Stokes directions, with the label order
/// valid on it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Arc {
    pub start: f64,
    pub end: f64,
    /// exponent indices sorted by increasing Re(c e^{-iφ}) at the midpoint
    pub order: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArcDecomposition {
    /// sorted Stokes directions in [0, 2π); empty when m = 1
    pub directions: Vec<f64>,
    /// arcs[k] runs from directions[k] to directions[k+1] (wrapping); a
    /// single full-circle arc when there are no directions
    pub arcs: Vec<Arc>,
}

fn normalize_angle(phi: f64) -> f64 {
    let mut x = phi % TAU;
    if x < 0.0 {
        x += TAU;
    }
    // collapse values within tolerance of 2π to 0
    if TAU - x < ANGLE_TOL {
        x = 0.0;
    }
    x
}

/// All Stokes directions of `e`, with the per-arc label orders.
pub fn stokes_directions(e: &ExponentSet) -> Result<ArcDecomposition> {
    let m = e.len();
    let mut dirs: Vec<f64> = Vec::new();
    for a in 0..m {
        for b in 0..m {
            if a == b {
                continue;
            }
            let phi = normalize_angle((e.exponents[a] - e.exponents[b]).arg() - PI / 2.0);
            if !dirs.iter().any(|&d| {
                let gap = (d - phi).abs();
                gap < ANGLE_TOL || (TAU - gap) < ANGLE_TOL
            }) {
                dirs.push(phi);
            }
        }
    }
    dirs.sort_by(|a, b| a.partial_cmp(b).expect("finite angles"));

    let mut arcs = Vec::new();
    if dirs.is_empty() {
        arcs.push(Arc {
            start: 0.0,
            end: TAU,
            order: e.order_at(1.2345)?, // any angle; m = 1 so order is trivial
        });
    } else {
        let d = dirs.len();
        for k in 0..d {
            let start = dirs[k];
            let end = if k + 1 < d { dirs[k + 1] } else { dirs[0] + TAU };
            let mid = 0.5 * (start + end);
            arcs.push(Arc {
                start,
                end,
                order: e.order_at(mid)?,
            });
        }
    }
    Ok(ArcDecomposition {
        directions: dirs,
        arcs,
    })
}

/// The permutation of label positions across a Stokes direction, together
/// with the maximal consecutive blocks it reverses.  `sigma[t]` is the
/// position after the crossing of the label sitting at position `t` before
/// it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossingPermutation {
    pub direction: f64,
    pub sigma: Vec<usize>,
    /// inclusive position intervals [i, j], each totally reversed
    pub blocks: Vec<(usize, usize)>,
}

impl CrossingPermutation {
    pub fn is_identity(&self) -> bool {
        self.sigma.iter().enumerate().all(|(i, &s)| i == s)
    }
}

pub fn crossing_permutation(e: &ExponentSet, phi: f64) -> Result<CrossingPermutation> {
    let deco = stokes_directions(e)?;
    let phi = normalize_angle(phi);
    let idx = deco
        .directions
        .iter()
        .position(|&d| {
            let gap = (d - phi).abs();
            gap < ANGLE_TOL || (TAU - gap) < ANGLE_TOL
        })
        .ok_or_else(|| Error::usage(format!("{phi} is not a Stokes direction")))?;
    let phi = deco.directions[idx];
    // probe just inside the adjacent arcs
    let d = deco.directions.len();
    let gap_before = if d == 1 {
        TAU
    } else {
        let prev = deco.directions[(idx + d - 1) % d];
        let mut g = normalize_angle(phi - prev);
        if g < ANGLE_TOL {
            g = TAU;
        }
        g
    };
    let gap_after = if d == 1 {
        TAU
    } else {
        let next = deco.directions[(idx + 1) % d];
        let mut g = normalize_angle(next - phi);
        if g < ANGLE_TOL {
            g = TAU;
        }
        g
    };
    let before = e.order_at(phi - 0.45 * gap_before.min(0.5))?;
    let after = e.order_at(phi + 0.45 * gap_after.min(0.5))?;

    let m = e.len();
    let mut pos_after = vec![0usize; m];
    for (t, &label) in after.iter().enumerate() {
        pos_after[label] = t;
    }
    let sigma: Vec<usize> = before.iter().map(|&label| pos_after[label]).collect();

    // decompose into disjoint reversed intervals; the crossing geometry
    // guarantees this shape, anything else is an internal error
    let mut blocks = Vec::new();
    let mut t = 0;
    while t < m {
        if sigma[t] == t {
            t += 1;
            continue;
        }
        let j = sigma[t];
        if j < t {
            return Err(Error::usage(format!(
                "crossing at {phi} is not a product of consecutive reversals"
            )));
        }
        for k in 0..=(j - t) {
            if sigma[t + k] != j - k {
                return Err(Error::usage(format!(
                    "crossing at {phi} is not a product of consecutive reversals"
                )));
            }
        }
        blocks.push((t, j));
        t = j + 1;
    }
    Ok(CrossingPermutation {
        direction: phi,
        sigma,
        blocks,
    })
}

/// A local system on the circle with a candidate DMS filtration: per arc, a
/// chain of subspaces given by basis matrices of increasing column count.
/// Everything is expressed in one reference fiber; arc k's flags are
/// understood as transported counterclockwise from arc 0's domain, and
/// `monodromy` is the once-around (counterclockwise) operator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilteredLocalSystem {
    pub dim: usize,
    pub monodromy: ComplexMatrix,
    pub arcs: Vec<Vec<ComplexMatrix>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationIssue {
    /// index into the sorted Stokes directions
    pub direction_index: usize,
    pub direction: f64,
    pub condition: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    fn push(&mut self, idx: usize, dir: f64, condition: &str, detail: String) {
        self.issues.push(ValidationIssue {
            direction_index: idx,
            direction: dir,
            condition: condition.to_string(),
            detail,
        });
    }
}

/// Quotient images of `steps` in span(top)/span(base): project each step's
/// columns onto the orthogonal complement of span(base).
fn quotient_images(
    base: Option<&ComplexMatrix>,
    steps: &[&ComplexMatrix],
    tol: f64,
) -> Result<Vec<ComplexMatrix>> {
    let proj = match base {
        None => None,
        Some(b) if b.cols() == 0 => None,
        Some(b) => Some(b.column_space(tol)?),
    };
    steps
        .iter()
        .map(|s| {
            let mut m = (*s).clone();
            if let Some(u) = &proj {
                // m -= U U^H m
                let coeffs = u.adjoint().mul(&m);
                m = m.sub(&u.mul(&coeffs));
            }
            Ok(m)
        })
        .collect()
}

/// Validate a candidate filtration against the crossing rules of its
/// exponent set.  Structural mismatches (wrong arc count, non-nested flags)
/// are usage errors; rule violations are collected in the report.
pub fn validate_filtration(
    f: &FilteredLocalSystem,
    e: &ExponentSet,
    tol: f64,
) -> Result<ValidationReport> {
    let deco = stokes_directions(e)?;
    let m = e.len();
    let r = f.dim;
    if f.monodromy.rows() != r || f.monodromy.cols() != r {
        return Err(Error::usage("monodromy must be dim x dim"));
    }
    if f.monodromy.rank(tol)? < r {
        return Err(Error::usage("monodromy must be invertible"));
    }
    if f.arcs.len() != deco.arcs.len() {
        return Err(Error::usage(format!(
            "expected {} arcs, got {}",
            deco.arcs.len(),
            f.arcs.len()
        )));
    }
    for (k, flag) in f.arcs.iter().enumerate() {
        if flag.len() != m {
            return Err(Error::usage(format!(
                "arc {k}: expected {m} filtration steps, got {}",
                flag.len()
            )));
        }
        let mut prev_cols = 0usize;
        for (t, step) in flag.iter().enumerate() {
            if step.rows() != r {
                return Err(Error::usage(format!("arc {k} step {t}: wrong row count")));
            }
            if step.cols() <= prev_cols {
                return Err(Error::usage(format!(
                    "arc {k} step {t}: column counts must strictly increase"
                )));
            }
            prev_cols = step.cols();
            if step.rank(tol)? < step.cols() {
                return Err(Error::usage(format!(
                    "arc {k} step {t}: basis columns are dependent"
                )));
            }
        }
        if flag[m - 1].cols() != r {
            return Err(Error::usage(format!("arc {k}: final step must be full")));
        }
        for t in 1..m {
            let joint = ComplexMatrix::hstack(&[&flag[t - 1], &flag[t]]);
            if joint.rank(tol)? != flag[t].cols() {
                return Err(Error::usage(format!(
                    "arc {k}: step {} not contained in step {}",
                    t - 1,
                    t
                )));
            }
        }
    }

    let mut report = ValidationReport::default();
    if deco.directions.is_empty() {
        return Ok(report); // single exponent: nothing to check
    }

    let d = deco.directions.len();
    for c in 0..d {
        let phi = deco.directions[c];
        let before_arc = (c + d - 1) % d;
        let after_arc = c;
        let cp = crossing_permutation(e, phi)?;
        let before = &f.arcs[before_arc];
        // at the wrap direction the after-arc flags return via the deck
        // transformation: compare with T^{-1} · (arc 0 flags)
        let after: Vec<ComplexMatrix> = if c == 0 {
            let t_inv = f.monodromy.inverse(tol)?;
            f.arcs[after_arc].iter().map(|s| t_inv.mul(s)).collect()
        } else {
            f.arcs[after_arc].clone()
        };

        let in_block = |t: usize| cp.blocks.iter().any(|&(i, j)| i <= t && t <= j);

        // (1) off-block steps agree
        for t in 0..m {
            if !in_block(t) && !before[t].same_column_span(&after[t], tol)? {
                report.push(
                    c,
                    phi,
                    "off-block-step",
                    format!("position {t}: subspaces differ across the crossing"),
                );
            }
        }
        // (2) block tops agree, (3) opposedness on each block quotient
        for &(i, j) in &cp.blocks {
            if !before[j].same_column_span(&after[j], tol)? {
                report.push(
                    c,
                    phi,
                    "block-top",
                    format!("block [{i},{j}]: top steps differ"),
                );
                continue;
            }
            let base = if i == 0 { None } else { Some(&before[i - 1]) };
            if let Some(b) = base {
                if !b.same_column_span(&after[i - 1], tol)? {
                    // already reported by (1); quotient would be ill-defined
                    continue;
                }
            }
            let base_dim = base.map(|b| b.cols()).unwrap_or(0);
            let w_dim = before[j].cols() - base_dim;
            let len = j - i + 1;
            let g_steps: Vec<&ComplexMatrix> = (i..=j).map(|t| &before[t]).collect();
            let gp_steps: Vec<&ComplexMatrix> = (i..=j).map(|t| &after[t]).collect();
            let g = quotient_images(base, &g_steps, tol)?;
            let gp = quotient_images(base, &gp_steps, tol)?;
            for t in 1..len {
                // G_t ⊕ G'_{len-t} = W
                let a = &g[t - 1];
                let b = &gp[len - t - 1];
                let da = a.rank(tol)?;
                let db = b.rank(tol)?;
                let joint = ComplexMatrix::hstack(&[a, b]).rank(tol)?;
                if da + db != w_dim || joint != w_dim {
                    report.push(
                        c,
                        phi,
                        "opposedness",
                        format!(
                            "block [{i},{j}], level {t}: dims {da}+{db} vs {w_dim}, joint rank {joint}"
                        ),
                    );
                }
            }
        }
    }
    Ok(report)
}

/// Exponents and expected graded-piece ranks read off a connection's
/// u^{-2} term.
pub fn skeleton_from_connection(conn: &MeromorphicConnection) -> Result<(ExponentSet, Vec<usize>)> {
    let (vals, mults) = exponent_eigenvalues_with_tol(conn, 1e-8)?;
    Ok((ExponentSet::with_tolerance(vals, 1e-9)?, mults))
}

/// Random filtration in general position consistent with the crossing rules:
/// a seed flag on arc 0 propagated across every direction, with the
/// monodromy chosen to close the seam.  `mults[k]` is the graded dimension
/// attached to exponent k.
pub fn generate_generic_filtration(
    e: &ExponentSet,
    mults: &[usize],
    seed: u64,
) -> Result<FilteredLocalSystem> {
    if mults.len() != e.len() {
        return Err(Error::usage("one multiplicity per exponent required"));
    }
    if mults.iter().any(|&m| m == 0) {
        return Err(Error::usage("graded dimensions must be positive"));
    }
    let r: usize = mults.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = 1e-10;

    let deco = stokes_directions(e)?;
    let rand_c =
        |rng: &mut ChaCha8Rng| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
    let random_invertible = |rng: &mut ChaCha8Rng, n: usize| -> Result<ComplexMatrix> {
        loop {
            let m = ComplexMatrix::from_fn(n, n, |_, _| rand_c(rng));
            if m.rank(1e-6)? == n {
                return Ok(m);
            }
        }
    };

    // seed flag on arc 0 from a random invertible frame
    let frame = random_invertible(&mut rng, r)?;
    let make_flag = |frame: &ComplexMatrix, order: &[usize]| -> Vec<ComplexMatrix> {
        let mut flags = Vec::with_capacity(order.len());
        let mut cum = 0usize;
        for &label in order {
            cum += mults[label];
            flags.push(frame.select_columns(&(0..cum).collect::<Vec<_>>()));
        }
        flags
    };

    if deco.directions.is_empty() {
        // single exponent: constant full flag, any invertible monodromy
        let flag = make_flag(&frame, &deco.arcs[0].order);
        let t = random_invertible(&mut rng, r)?;
        return Ok(FilteredLocalSystem {
            dim: r,
            monodromy: t,
            arcs: vec![flag],
        });
    }

    let d = deco.directions.len();
    let mut arcs: Vec<Vec<ComplexMatrix>> = Vec::with_capacity(d);
    arcs.push(make_flag(&frame, &deco.arcs[0].order));

    // propagate across directions 1..d-1, then once more across the wrap
    // direction to determine the monodromy
    let mut carried: Vec<ComplexMatrix> = Vec::new();
    for step in 1..=d {
        let dir_idx = step % d;
        let phi = deco.directions[dir_idx];
        let cp = crossing_permutation(e, phi)?;
        let prev = &arcs[step - 1];
        let mut next: Vec<Option<ComplexMatrix>> = vec![None; e.len()];
        let in_block = |t: usize| cp.blocks.iter().any(|&(i, j)| i <= t && t <= j);
        for t in 0..e.len() {
            if !in_block(t) {
                next[t] = Some(prev[t].clone());
            }
        }
        for &(i, j) in &cp.blocks {
            next[j] = Some(prev[j].clone());
            let base = if i == 0 { None } else { Some(&prev[i - 1]) };
            // W = span(prev[j]) / span(base); orthonormal basis of W
            let w_dim = prev[j].cols() - base.map(|b| b.cols()).unwrap_or(0);
            let g_steps: Vec<&ComplexMatrix> = (i..=j).map(|t| &prev[t]).collect();
            let g = quotient_images(base, &g_steps, tol)?;
            let w_basis = g.last().unwrap().column_space(tol)?; // r x w_dim
            // graded dims of the after-flag inside the block: reversed
            let labels_before: Vec<usize> = (i..=j)
                .map(|t| deco.arcs[(dir_idx + d - 1) % d].order[t])
                .collect();
            let mut rev_dims: Vec<usize> = labels_before.iter().map(|&l| mults[l]).collect();
            rev_dims.reverse();
            // random opposed flag on W with the reversed graded dims
            let len = j - i + 1;
            let mut attempt = 0;
            'retry: loop {
                attempt += 1;
                if attempt > 50 {
                    return Err(Error::Linalg(
                        "could not find a generic opposed flag".to_string(),
                    ));
                }
                let mixer = random_invertible(&mut rng, w_dim)?;
                let mut cum = 0usize;
                let mut cand: Vec<ComplexMatrix> = Vec::with_capacity(len);
                for t in 0..len {
                    cum += rev_dims[t];
                    cand.push(mixer.select_columns(&(0..cum).collect::<Vec<_>>()));
                }
                // opposedness against the before-flag quotient images
                for t in 1..len {
                    let a = &g[t - 1];
                    let b_w = w_basis.mul(&cand[len - t - 1]);
                    let da = a.rank(tol)?;
                    let db = b_w.rank(tol)?;
                    if da + db != w_dim || ComplexMatrix::hstack(&[a, &b_w]).rank(tol)? != w_dim {
                        continue 'retry;
                    }
                }
                // lift to the ambient space on top of the base
                for t in 0..len - 1 {
                    let lifted = w_basis.mul(&cand[t]);
                    let combined = match base {
                        Some(b) => ComplexMatrix::hstack(&[b, &lifted]),
                        None => lifted,
                    };
                    next[i + t] = Some(combined);
                }
                break;
            }
        }
        let flag: Vec<ComplexMatrix> = next.into_iter().map(|o| o.expect("filled")).collect();
        if step < d {
            arcs.push(flag);
        } else {
            carried = flag;
        }
    }

    // seam: need T^{-1} · arcs[0] to agree with `carried` as a flag, i.e.
    // T maps carried[t] onto arcs[0][t].  Map an adapted frame of one full
    // flag onto an adapted frame of the other.
    let adapted = |flag: &[ComplexMatrix]| -> Result<ComplexMatrix> {
        let mut cols: Vec<ComplexMatrix> = Vec::new();
        let mut prev: Option<&ComplexMatrix> = None;
        for step in flag {
            let new_cols = match prev {
                None => step.column_space(tol)?,
                Some(p) => {
                    let pb = p.column_space(tol)?;
                    let coeffs = pb.adjoint().mul(step);
                    let resid = step.sub(&pb.mul(&coeffs));
                    resid.column_space(tol)?
                }
            };
            cols.push(new_cols);
            prev = Some(step);
        }
        let refs: Vec<&ComplexMatrix> = cols.iter().collect();
        Ok(ComplexMatrix::hstack(&refs))
    };
    let b_carried = adapted(&carried)?;
    let b_zero = adapted(&arcs[0])?;
    // want T^{-1}·(arcs[0] flag) = carried flag: T = b_zero · b_carried^{-1}
    let t = b_zero.mul(&b_carried.inverse(tol)?);

    Ok(FilteredLocalSystem {
        dim: r,
        monodromy: t,
        arcs,
    })
}

/// Replace one step of one arc with a random subspace of the same dimension,
/// for corruption-detection tests.
pub fn corrupt_filtration(f: &FilteredLocalSystem, seed: u64) -> FilteredLocalSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = f.clone();
    let arc = rng.random_range(0..out.arcs.len());
    let m = out.arcs[arc].len();
    if m <= 1 {
        return out;
    }
    let step = rng.random_range(0..m - 1); // never the full top step
    let cols = out.arcs[arc][step].cols();
    out.arcs[arc][step] = ComplexMatrix::from_fn(f.dim, cols, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    out
}
