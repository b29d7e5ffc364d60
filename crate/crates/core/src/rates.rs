//! Achievable rates of 1-layer RS, 2-layer hierarchical RS, SDMA and
//! two-user NOMA for given composite channels and precoders.
//!
//! All rates are spectral efficiencies in bit/s/Hz.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::{abs2, CMatrix, Real};

/// Transmission scheme and the column layout of its precoder.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Columns `[p_c, p_p1..p_pK]`.
    Rs1Layer,
    /// Columns `[p_c1, p_c2,1..p_c2,G, p_p1..p_pK]`; `groups[g]` lists the
    /// users of group g.
    Hrs2Layer { groups: Vec<Vec<usize>> },
    /// Columns `[p_1..p_K]`.
    Sdma,
    /// Columns `[p_1, p_2]`; `order[0]` is decoded first by both users.
    Noma { order: [usize; 2] },
}

impl Scheme {
    /// Number of precoder columns for `users` users.
    pub fn streams(&self, users: usize) -> usize {
        match self {
            Scheme::Rs1Layer => users + 1,
            Scheme::Hrs2Layer { groups } => users + groups.len() + 1,
            Scheme::Sdma => users,
            Scheme::Noma { .. } => 2,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Scheme::Rs1Layer => "rs1",
            Scheme::Hrs2Layer { .. } => "hrs",
            Scheme::Sdma => "sdma",
            Scheme::Noma { .. } => "noma",
        }
    }

    /// Check the scheme against the number of users.
    pub fn check(&self, users: usize) -> Result<()> {
        match self {
            Scheme::Hrs2Layer { groups } => check_partition(groups, users),
            Scheme::Noma { order } => {
                if users != 2 {
                    return Err(Error::Unsupported(format!(
                        "NOMA is implemented for 2 users, got {users}"
                    )));
                }
                if !(order[0] < 2 && order[1] < 2 && order[0] != order[1]) {
                    return Err(Error::invalid(format!("bad NOMA decoding order {order:?}")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Group index of every user (HRS only).
    pub fn group_of(&self, users: usize) -> Vec<usize> {
        let mut out = vec![0; users];
        if let Scheme::Hrs2Layer { groups } = self {
            for (g, members) in groups.iter().enumerate() {
                for &k in members {
                    if k < users {
                        out[k] = g;
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Scheme family as named on the command line and in CSV files. HRS groups
/// and NOMA decoding orders are filled in by the experiment runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    Rs1,
    Hrs,
    Sdma,
    Noma,
}

impl SchemeKind {
    pub fn label(&self) -> &'static str {
        match self {
            SchemeKind::Rs1 => "rs1",
            SchemeKind::Hrs => "hrs",
            SchemeKind::Sdma => "sdma",
            SchemeKind::Noma => "noma",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "rs1" => Ok(SchemeKind::Rs1),
            "hrs" => Ok(SchemeKind::Hrs),
            "sdma" => Ok(SchemeKind::Sdma),
            "noma" => Ok(SchemeKind::Noma),
            other => Err(Error::invalid(format!("unknown scheme '{other}'"))),
        }
    }
}

fn check_partition(groups: &[Vec<usize>], users: usize) -> Result<()> {
    let mut seen = vec![false; users];
    for g in groups {
        if g.is_empty() {
            return Err(Error::invalid("HRS groups must be non-empty"));
        }
        for &k in g {
            if k >= users || seen[k] {
                return Err(Error::invalid(format!(
                    "HRS groups {groups:?} do not partition {users} users"
                )));
            }
            seen[k] = true;
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::invalid(format!(
            "HRS groups {groups:?} do not cover all {users} users"
        )));
    }
    Ok(())
}

/// Scheme-tagged precoding matrix, `N*N_t x streams`.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder<T: Real> {
    scheme: Scheme,
    users: usize,
    matrix: CMatrix<T>,
}

impl<T: Real> Precoder<T> {
    pub fn new(scheme: Scheme, users: usize, matrix: CMatrix<T>) -> Result<Self> {
        scheme.check(users)?;
        let want = scheme.streams(users);
        if matrix.ncols() != want {
            return Err(Error::dims(format!(
                "{scheme} with {users} users needs {want} precoder columns, got {}",
                matrix.ncols()
            )));
        }
        Ok(Precoder {
            scheme,
            users,
            matrix,
        })
    }

    pub fn scheme(&self) -> &Scheme {
        &self.scheme
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.matrix
    }

    /// Transmit energy of each AP's row block, `E{x_n^H x_n}`.
    pub fn power_per_ap(&self, antennas_per_ap: usize) -> Vec<T> {
        let rows = self.matrix.nrows();
        (0..rows / antennas_per_ap.max(1))
            .map(|n| {
                self.matrix
                    .rows(n * antennas_per_ap, antennas_per_ap)
                    .iter()
                    .fold(T::zero(), |acc, z| acc + abs2(*z))
            })
            .collect()
    }

    /// `max_n (energy_n - P_n)`; non-positive when the budgets hold.
    pub fn power_residual(&self, budgets: &[T], antennas_per_ap: usize) -> T {
        self.power_per_ap(antennas_per_ap)
            .iter()
            .zip(budgets)
            .fold(T::min_value().unwrap_or(-T::one()), |m, (e, p)| m.max(*e - *p))
    }
}

/// Per-user rate breakdown. For NOMA each user's single stream is reported
/// in `private_rates`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateResult<T> {
    /// `R_c,k` (1-layer) or `R_c1,k` (hierarchical).
    pub common_per_user: Vec<T>,
    /// `min_k` of `common_per_user`.
    pub common_rate: T,
    /// `R_c2,g(k),k` for the user's own group (hierarchical only).
    pub inner_per_user: Vec<T>,
    /// `R_c2,g` per group (hierarchical only).
    pub inner_common_rates: Vec<T>,
    pub private_rates: Vec<T>,
    pub common_alloc: Vec<T>,
    pub inner_alloc: Vec<T>,
    pub user_totals: Vec<T>,
    /// HRS user groups; empty for the other schemes.
    pub groups: Vec<Vec<usize>>,
}

/// Division of the common stream(s) among users.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation<T> {
    pub common: Vec<T>,
    /// Per-user share of the user's group inner-common stream.
    pub inner: Vec<T>,
}

impl<T: Real> Allocation<T> {
    pub fn zero(users: usize) -> Self {
        Allocation {
            common: vec![T::zero(); users],
            inner: vec![T::zero(); users],
        }
    }
}

impl<T: Real> RateResult<T> {
    fn from_parts(
        common_per_user: Vec<T>,
        inner_per_user: Vec<T>,
        inner_common_rates: Vec<T>,
        private_rates: Vec<T>,
        groups: Vec<Vec<usize>>,
    ) -> Self {
        let k = private_rates.len();
        let common_rate = if common_per_user.is_empty() {
            T::zero()
        } else {
            common_per_user.iter().copied().fold(T::max_value().unwrap(), |a, b| a.min(b))
        };
        RateResult {
            common_per_user,
            common_rate,
            inner_per_user,
            inner_common_rates,
            user_totals: private_rates.clone(),
            private_rates,
            common_alloc: vec![T::zero(); k],
            inner_alloc: vec![T::zero(); k],
            groups,
        }
    }

    pub fn users(&self) -> usize {
        self.private_rates.len()
    }

    /// Copy with the given allocation applied and totals recomputed.
    pub fn with_allocation(&self, alloc: &Allocation<T>) -> Result<Self> {
        let totals = totals(self, alloc)?;
        Ok(RateResult {
            common_alloc: alloc.common.clone(),
            inner_alloc: alloc.inner.clone(),
            user_totals: totals,
            ..self.clone()
        })
    }

    pub fn sum_rate(&self) -> T {
        self.user_totals.iter().fold(T::zero(), |a, b| a + *b)
    }

    /// `sum_k u_k R_k^tot` with the current allocation.
    pub fn weighted_sum(&self, weights: &[T]) -> T {
        self.user_totals
            .iter()
            .zip(weights)
            .fold(T::zero(), |a, (r, u)| a + *r * *u)
    }
}

/// `log2(1 + s / (i + n))`, 0 when the signal power is 0.
pub(crate) fn stream_rate<T: Real>(signal: T, interference: T, noise: T) -> T {
    if signal <= T::zero() {
        return T::zero();
    }
    (T::one() + signal / (interference + noise)).log2()
}

/// Received powers `|h_k^H p_j|^2`, users by columns.
pub fn received_powers<T: Real>(h_eff: &CMatrix<T>, precoder: &CMatrix<T>) -> DMatrix<T> {
    (h_eff.adjoint() * precoder).map(abs2)
}

fn check_inputs<T: Real>(h_eff: &CMatrix<T>, pre: &Precoder<T>, noise: T) -> Result<()> {
    if !(noise >= T::zero()) {
        return Err(Error::invalid(format!("noise power must be >= 0, got {noise}")));
    }
    if h_eff.nrows() != pre.matrix.nrows() {
        return Err(Error::dims(format!(
            "channel has {} transmit rows, precoder has {}",
            h_eff.nrows(),
            pre.matrix.nrows()
        )));
    }
    if h_eff.ncols() != pre.users {
        return Err(Error::dims(format!(
            "channel has {} users, precoder was built for {}",
            h_eff.ncols(),
            pre.users
        )));
    }
    Ok(())
}

fn wrong_scheme(got: &Scheme, want: &str) -> Error {
    Error::invalid(format!("expected a {want} precoder, got {got}"))
}

fn expect_scheme(got: &Scheme, want: &str) -> Result<()> {
    if got.label() != want {
        return Err(wrong_scheme(got, want));
    }
    Ok(())
}

fn row_sum<T: Real>(q: &DMatrix<T>, k: usize, cols: impl Iterator<Item = usize>) -> T {
    cols.fold(T::zero(), |a, j| a + q[(k, j)])
}

/// Private rates treating the other private streams plus `extra(k)` as
/// noise; private stream of user k sits in column `first + k`.
fn private_rates<T: Real>(
    q: &DMatrix<T>,
    first: usize,
    noise: T,
    extra: impl Fn(usize) -> T,
) -> Vec<T> {
    let k_users = q.nrows();
    (0..k_users)
        .map(|k| {
            let interf = row_sum(q, k, (0..k_users).filter(|&j| j != k).map(|j| first + j));
            stream_rate(q[(k, first + k)], interf + extra(k), noise)
        })
        .collect()
}

/// One common stream decoded first by every user, then private streams.
pub fn rate_rs1<T: Real>(h_eff: &CMatrix<T>, pre: &Precoder<T>, noise: T) -> Result<RateResult<T>> {
    expect_scheme(&pre.scheme, "rs1")?;
    check_inputs(h_eff, pre, noise)?;
    let q = received_powers(h_eff, &pre.matrix);
    let k_users = pre.users;
    let common = (0..k_users)
        .map(|k| stream_rate(q[(k, 0)], row_sum(&q, k, 1..=k_users), noise))
        .collect();
    let private = private_rates(&q, 1, noise, |_| T::zero());
    Ok(RateResult::from_parts(common, vec![], vec![], private, vec![]))
}

/// Inter-group common stream, per-group inner common streams and private
/// streams, decoded with two SIC layers.
pub fn rate_hrs<T: Real>(h_eff: &CMatrix<T>, pre: &Precoder<T>, noise: T) -> Result<RateResult<T>> {
    let Scheme::Hrs2Layer { groups } = &pre.scheme else {
        return Err(wrong_scheme(&pre.scheme, "hrs"));
    };
    check_inputs(h_eff, pre, noise)?;
    let q = received_powers(h_eff, &pre.matrix);
    let k_users = pre.users;
    let n_groups = groups.len();
    let inner_col = |g: usize| 1 + g;
    let priv_first = 1 + n_groups;
    let group_of = pre.scheme.group_of(k_users);
    let all_private = |k| row_sum(&q, k, priv_first..priv_first + k_users);
    let other_inner =
        |k: usize, g: usize| row_sum(&q, k, (0..n_groups).filter(|&o| o != g).map(inner_col));

    let outer: Vec<T> = (0..k_users)
        .map(|k| {
            let interf = row_sum(&q, k, (0..n_groups).map(inner_col)) + all_private(k);
            stream_rate(q[(k, 0)], interf, noise)
        })
        .collect();
    let inner_per_user: Vec<T> = (0..k_users)
        .map(|k| {
            let g = group_of[k];
            stream_rate(q[(k, inner_col(g))], other_inner(k, g) + all_private(k), noise)
        })
        .collect();
    let inner_common: Vec<T> = groups
        .iter()
        .map(|members| {
            members
                .iter()
                .map(|&k| inner_per_user[k])
                .fold(T::max_value().unwrap(), |a, b| a.min(b))
        })
        .collect();
    let private = private_rates(&q, priv_first, noise, |k| other_inner(k, group_of[k]));
    Ok(RateResult::from_parts(
        outer,
        inner_per_user,
        inner_common,
        private,
        groups.clone(),
    ))
}

/// Private streams only, interference treated as noise.
pub fn rate_sdma<T: Real>(h_eff: &CMatrix<T>, pre: &Precoder<T>, noise: T) -> Result<RateResult<T>> {
    expect_scheme(&pre.scheme, "sdma")?;
    check_inputs(h_eff, pre, noise)?;
    let q = received_powers(h_eff, &pre.matrix);
    let private = private_rates(&q, 0, noise, |_| T::zero());
    Ok(RateResult::from_parts(vec![], vec![], vec![], private, vec![]))
}

/// Two-user superposition coding with SIC. The first-decoded stream must be
/// decodable at both users.
pub fn rate_noma<T: Real>(h_eff: &CMatrix<T>, pre: &Precoder<T>, noise: T) -> Result<RateResult<T>> {
    let Scheme::Noma { order } = pre.scheme else {
        return Err(wrong_scheme(&pre.scheme, "noma"));
    };
    check_inputs(h_eff, pre, noise)?;
    let q = received_powers(h_eff, &pre.matrix);
    let [w, s] = order;
    let at_w = stream_rate(q[(w, w)], q[(w, s)], noise);
    let at_s = stream_rate(q[(s, w)], q[(s, s)], noise);
    let mut rates = vec![T::zero(); 2];
    rates[w] = at_w.min(at_s);
    rates[s] = stream_rate(q[(s, s)], T::zero(), noise);
    Ok(RateResult::from_parts(vec![], vec![], vec![], rates, vec![]))
}

/// Dispatch on the precoder's scheme.
pub fn evaluate<T: Real>(h_eff: &CMatrix<T>, pre: &Precoder<T>, noise: T) -> Result<RateResult<T>> {
    match pre.scheme {
        Scheme::Rs1Layer => rate_rs1(h_eff, pre, noise),
        Scheme::Hrs2Layer { .. } => rate_hrs(h_eff, pre, noise),
        Scheme::Sdma => rate_sdma(h_eff, pre, noise),
        Scheme::Noma { .. } => rate_noma(h_eff, pre, noise),
    }
}

/// Per-user totals `c_k + inner_k + R_p,k` after checking the allocation
/// against the common-rate caps.
pub fn totals<T: Real>(res: &RateResult<T>, alloc: &Allocation<T>) -> Result<Vec<T>> {
    let k = res.users();
    if alloc.common.len() != k || alloc.inner.len() != k {
        return Err(Error::dims(format!("allocation must have {k} entries")));
    }
    let slack = |cap: T| cap * T::lit(1e-12) + T::lit(1e-12);
    if alloc.common.iter().chain(&alloc.inner).any(|c| *c < T::zero()) {
        return Err(Error::invalid("allocations must be >= 0"));
    }
    let common: T = alloc.common.iter().fold(T::zero(), |a, b| a + *b);
    if common > res.common_rate + slack(res.common_rate) {
        return Err(Error::invalid(format!(
            "common allocation {common} exceeds common rate {}",
            res.common_rate
        )));
    }
    if res.groups.is_empty() {
        if alloc.inner.iter().any(|c| *c > T::zero()) {
            return Err(Error::invalid("inner-group allocation without inner common streams"));
        }
    } else {
        for (g, members) in res.groups.iter().enumerate() {
            let used = members.iter().fold(T::zero(), |a, &m| a + alloc.inner[m]);
            let cap = res.inner_common_rates[g];
            if used > cap + slack(cap) {
                return Err(Error::invalid(format!(
                    "inner allocation {used} of group {g} exceeds its common rate {cap}"
                )));
            }
        }
    }
    Ok((0..k)
        .map(|i| alloc.common[i] + alloc.inner[i] + res.private_rates[i])
        .collect())
}

fn argmax<T: Real>(weights: &[T], among: impl Iterator<Item = usize>) -> Option<usize> {
    among.fold(None, |best: Option<usize>, k| match best {
        Some(b) if weights[b] >= weights[k] => Some(b),
        _ => Some(k),
    })
}

/// The weighted-sum-rate optimal allocation: each common stream's whole rate
/// goes to its highest-weight user (lowest index on ties).
pub fn greedy_allocation<T: Real>(res: &RateResult<T>, weights: &[T]) -> Allocation<T> {
    let k = res.users();
    let mut alloc = Allocation::zero(k);
    if !res.common_per_user.is_empty() {
        if let Some(best) = argmax(weights, 0..k) {
            alloc.common[best] = res.common_rate;
        }
    }
    for (g, members) in res.groups.iter().enumerate() {
        if let Some(best) = argmax(weights, members.iter().copied()) {
            alloc.inner[best] = res.inner_common_rates[g];
        }
    }
    alloc
}

/// Apply [`greedy_allocation`] and return the result with totals.
pub fn allocate_greedy<T: Real>(res: &RateResult<T>, weights: &[T]) -> RateResult<T> {
    res.with_allocation(&greedy_allocation(res, weights))
        .expect("greedy allocation respects the caps")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Cplx;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type C = Cplx<f64>;
    const LOG2_1P5: f64 = 0.584_962_500_721_156_2;

    fn real(rows: usize, cols: usize, v: &[f64]) -> CMatrix<f64> {
        CMatrix::from_row_slice(rows, cols, &v.iter().map(|&x| C::new(x, 0.0)).collect::<Vec<_>>())
    }

    fn random(rows: usize, cols: usize, seed: u64) -> CMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(rows, cols, |_, _| crate::scalar::cn01(&mut rng))
    }

    #[test]
    fn rs1_single_user_shannon() {
        let h = real(1, 1, &[1.0]);
        let pre = Precoder::new(Scheme::Rs1Layer, 1, real(1, 2, &[0.0, 1.0])).unwrap();
        let r = rate_rs1(&h, &pre, 1.0).unwrap();
        assert!((r.private_rates[0] - 1.0).abs() < 1e-12);
        assert_eq!(r.common_rate, 0.0);
    }

    #[test]
    fn rs1_orthogonal_users() {
        let h = real(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let pre = Precoder::new(Scheme::Rs1Layer, 2, real(2, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0])).unwrap();
        let r = rate_rs1(&h, &pre, 1.0).unwrap();
        assert!((r.private_rates[0] - 1.0).abs() < 1e-12);
        assert!((r.private_rates[1] - 1.0).abs() < 1e-12);
        assert_eq!(r.common_per_user, vec![0.0, 0.0]);
    }

    #[test]
    fn rs1_common_only() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = real(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let pre = Precoder::new(Scheme::Rs1Layer, 2, real(2, 3, &[s, 0.0, 0.0, s, 0.0, 0.0])).unwrap();
        let r = rate_rs1(&h, &pre, 1.0).unwrap();
        for k in 0..2 {
            assert!((r.common_per_user[k] - LOG2_1P5).abs() < 1e-12);
        }
        assert!((r.common_rate - LOG2_1P5).abs() < 1e-12);
    }

    fn hrs_scheme() -> Scheme {
        Scheme::Hrs2Layer {
            groups: vec![vec![0], vec![1]],
        }
    }

    #[test]
    fn hrs_hand_example() {
        let h = real(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        // columns: c1, c2_1, c2_2, p1, p2
        let p = real(2, 5, &[1.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5]);
        let pre = Precoder::new(hrs_scheme(), 2, p).unwrap();
        let r = rate_hrs(&h, &pre, 1.0).unwrap();
        assert!((r.common_per_user[0] - (1.8f64).log2()).abs() < 1e-12);
        assert_eq!(r.common_per_user[1], 0.0);
        assert_eq!(r.common_rate, 0.0);
    }

    #[test]
    fn hrs_collapses_to_rs1_and_sdma() {
        for seed in 0..20 {
            let h = random(3, 3, seed);
            let p = random(3, 4, seed + 100);
            let groups = vec![vec![0, 2], vec![1]];
            let mut hp = CMatrix::zeros(3, 6);
            hp.column_mut(0).copy_from(&p.column(0));
            for k in 0..3 {
                hp.column_mut(3 + k).copy_from(&p.column(1 + k));
            }
            let hrs = Precoder::new(Scheme::Hrs2Layer { groups }, 3, hp.clone()).unwrap();
            let rs = Precoder::new(Scheme::Rs1Layer, 3, p.clone()).unwrap();
            let a = rate_hrs(&h, &hrs, 0.7).unwrap();
            let b = rate_rs1(&h, &rs, 0.7).unwrap();
            assert_eq!(a.common_per_user, b.common_per_user);
            assert_eq!(a.private_rates, b.private_rates);
            assert_eq!(a.common_rate, b.common_rate);

            hp.column_mut(0).fill(C::new(0.0, 0.0));
            let sd = Precoder::new(Scheme::Sdma, 3, p.columns(1, 3).into_owned()).unwrap();
            let hrs0 = Precoder::new(hrs.scheme().clone(), 3, hp).unwrap();
            assert_eq!(
                rate_hrs(&h, &hrs0, 0.7).unwrap().private_rates,
                rate_sdma(&h, &sd, 0.7).unwrap().private_rates
            );
        }
    }

    #[test]
    fn hrs_inner_stream_interference() {
        // user 0 is alone in group 0; group 1's inner stream interferes
        // with its private stream, its own group's does not
        let h = real(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let p = real(2, 5, &[0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let pre = Precoder::new(hrs_scheme(), 2, p).unwrap();
        let r = rate_hrs(&h, &pre, 1.0).unwrap();
        // gamma_p,0 = 1 / (|p_c2,1|^2 + 1) = 1/2
        assert!((r.private_rates[0] - LOG2_1P5).abs() < 1e-12);
        // gamma_c2,0,0 = 1 / (1 + 1 + 1) (other inner + private + noise)
        assert!((r.inner_per_user[0] - (4.0f64 / 3.0).log2()).abs() < 1e-12);
        assert_eq!(r.inner_common_rates.len(), 2);
    }

    #[test]
    fn hrs_rejects_bad_groups() {
        let bad = Scheme::Hrs2Layer {
            groups: vec![vec![0], vec![0]],
        };
        assert!(Precoder::new(bad, 2, CMatrix::<f64>::zeros(2, 5)).is_err());
        let missing = Scheme::Hrs2Layer {
            groups: vec![vec![0]],
        };
        assert!(Precoder::new(missing, 2, CMatrix::<f64>::zeros(2, 4)).is_err());
    }

    #[test]
    fn sdma_examples() {
        let h = real(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let pre = Precoder::new(Scheme::Sdma, 2, real(2, 2, &[1.0, 0.0, 0.0, 1.0])).unwrap();
        let r = rate_sdma(&h, &pre, 1.0).unwrap();
        assert_eq!(r.private_rates, vec![1.0, 1.0]);
        assert_eq!(r.common_rate, 0.0);

        let h = real(2, 1, &[0.6, 0.8]);
        let pre = Precoder::new(Scheme::Sdma, 1, h.clone()).unwrap();
        assert!((rate_sdma(&h, &pre, 1.0).unwrap().private_rates[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rs1_without_common_equals_sdma() {
        for seed in 0..50 {
            let h = random(2, 2, seed);
            let p = random(2, 2, seed + 1000);
            let mut rp = CMatrix::zeros(2, 3);
            rp.columns_mut(1, 2).copy_from(&p);
            let rs = rate_rs1(&h, &Precoder::new(Scheme::Rs1Layer, 2, rp).unwrap(), 0.3).unwrap();
            let sd = rate_sdma(&h, &Precoder::new(Scheme::Sdma, 2, p).unwrap(), 0.3).unwrap();
            assert_eq!(rs.private_rates, sd.private_rates);
            assert_eq!(rs.common_rate, 0.0);
        }
    }

    #[test]
    fn noma_examples() {
        let h = real(1, 2, &[1.0, 1.0]);
        let pre = Precoder::new(Scheme::Noma { order: [0, 1] }, 2, real(1, 2, &[1.0, 1.0])).unwrap();
        let r = rate_noma(&h, &pre, 1.0).unwrap();
        assert!((r.private_rates[0] - LOG2_1P5).abs() < 1e-12);
        assert!((r.private_rates[1] - 1.0).abs() < 1e-12);

        let pre = Precoder::new(Scheme::Noma { order: [1, 0] }, 2, real(1, 2, &[1.0, 0.0])).unwrap();
        let r = rate_noma(&h, &pre, 1.0).unwrap();
        assert_eq!(r.private_rates[1], 0.0);
        assert!((r.private_rates[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noma_matches_scalar_superposition_region() {
        // degraded scalar pair: strong user s = 1 (h = 1), weak user w = 0 (h = 0.5)
        let h = real(1, 2, &[0.5, 1.0]);
        let total = 10.0;
        for i in 0..=20 {
            let beta = i as f64 / 20.0; // fraction of power on the strong user
            let p = real(1, 2, &[(total * (1.0 - beta)).sqrt(), (total * beta).sqrt()]);
            let pre = Precoder::new(Scheme::Noma { order: [0, 1] }, 2, p).unwrap();
            let r = rate_noma(&h, &pre, 1.0).unwrap();
            let rw = (1.0 + 0.25 * total * (1.0 - beta) / (0.25 * total * beta + 1.0)).log2();
            let rs = (1.0 + total * beta).log2();
            assert!((r.private_rates[0] - rw).abs() < 1e-12, "{beta}");
            assert!((r.private_rates[1] - rs).abs() < 1e-12, "{beta}");
        }
    }

    #[test]
    fn noma_needs_two_users() {
        let err = Precoder::<f64>::new(Scheme::Noma { order: [0, 1] }, 3, CMatrix::zeros(2, 2));
        assert!(matches!(err, Err(Error::Unsupported(_))));
    }

    #[test]
    fn dimension_and_noise_errors() {
        let pre = Precoder::new(Scheme::Sdma, 2, random(2, 2, 1)).unwrap();
        assert!(rate_sdma(&random(3, 2, 2), &pre, 1.0).is_err());
        assert!(rate_sdma(&random(2, 2, 2), &pre, -1.0).is_err());
        assert!(rate_rs1(&random(2, 2, 2), &pre, 1.0).is_err());
        assert!(Precoder::new(Scheme::Rs1Layer, 2, random(2, 2, 1)).is_err());
    }

    #[test]
    fn totals_examples() {
        let h = random(2, 2, 5);
        let pre = Precoder::new(Scheme::Rs1Layer, 2, random(2, 3, 6)).unwrap();
        let r = rate_rs1(&h, &pre, 0.1).unwrap();
        assert_eq!(totals(&r, &Allocation::zero(2)).unwrap(), r.private_rates);

        let alloc = Allocation {
            common: vec![r.common_rate, 0.0],
            inner: vec![0.0, 0.0],
        };
        let t = totals(&r, &alloc).unwrap();
        assert_eq!(t[0], r.private_rates[0] + r.common_rate);
        assert_eq!(t[1], r.private_rates[1]);

        let over = Allocation {
            common: vec![r.common_rate, r.common_rate * 0.1 + 1e-3],
            inner: vec![0.0, 0.0],
        };
        assert!(totals(&r, &over).is_err());
        let negative = Allocation {
            common: vec![-0.1, 0.0],
            inner: vec![0.0, 0.0],
        };
        assert!(totals(&r, &negative).is_err());
    }

    #[test]
    fn totals_sum_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..100 {
            let h = random(2, 3, seed);
            let pre = Precoder::new(Scheme::Rs1Layer, 3, random(2, 4, seed + 7)).unwrap();
            let r = rate_rs1(&h, &pre, 0.2).unwrap();
            let raw: Vec<f64> = (0..3).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
            let s: f64 = raw.iter().sum();
            let common: Vec<f64> = raw.iter().map(|x| x / s * r.common_rate * 0.999).collect();
            let alloc = Allocation {
                common: common.clone(),
                inner: vec![0.0; 3],
            };
            let t = totals(&r, &alloc).unwrap();
            let lhs: f64 = t.iter().sum();
            let rhs: f64 = r.private_rates.iter().sum::<f64>() + common.iter().sum::<f64>();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn hrs_inner_caps() {
        let h = random(2, 2, 11);
        let pre = Precoder::new(hrs_scheme(), 2, random(2, 5, 12)).unwrap();
        let r = rate_hrs(&h, &pre, 0.5).unwrap();
        let ok = greedy_allocation(&r, &[0.3, 0.7]);
        assert_eq!(ok.inner, r.inner_common_rates);
        let over = Allocation {
            common: vec![0.0; 2],
            inner: vec![r.inner_common_rates[0] + 0.1, 0.0],
        };
        assert!(totals(&r, &over).is_err());
    }

    #[test]
    fn greedy_allocation_goes_to_heaviest_user() {
        let h = random(2, 2, 13);
        let pre = Precoder::new(Scheme::Rs1Layer, 2, random(2, 3, 14)).unwrap();
        let r = rate_rs1(&h, &pre, 0.5).unwrap();
        let a = allocate_greedy(&r, &[0.2, 0.8]);
        assert_eq!(a.common_alloc, vec![0.0, r.common_rate]);
        let tie = allocate_greedy(&r, &[0.5, 0.5]);
        assert_eq!(tie.common_alloc, vec![r.common_rate, 0.0]);
    }

    #[test]
    fn single_precision_rates() {
        let h = CMatrix::<f32>::from_row_slice(1, 1, &[Cplx::new(1.0, 0.0)]);
        let pre = Precoder::new(Scheme::Sdma, 1, h.clone()).unwrap();
        assert!((rate_sdma(&h, &pre, 1.0f32).unwrap().private_rates[0] - 1.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn noise_scale_invariance(seed in 0u64..10_000, scale in 1e-6f64..1e6) {
            let h = random(2, 2, seed);
            let p = random(2, 3, seed ^ 0xabcdef);
            let pre = Precoder::new(Scheme::Rs1Layer, 2, p.clone()).unwrap();
            let scaled = Precoder::new(Scheme::Rs1Layer, 2, p * C::new(scale.sqrt(), 0.0)).unwrap();
            let a = rate_rs1(&h, &pre, 0.4).unwrap();
            let b = rate_rs1(&h, &scaled, 0.4 * scale).unwrap();
            for (x, y) in a.common_per_user.iter().chain(&a.private_rates)
                .zip(b.common_per_user.iter().chain(&b.private_rates)) {
                prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
            }
        }

        #[test]
        fn common_rate_monotone_in_common_gain(seed in 0u64..10_000, boost in 1.0f64..10.0) {
            let h = random(2, 2, seed);
            let p = random(2, 3, seed + 1);
            let mut q = p.clone();
            q.column_mut(0).scale_mut(boost.sqrt());
            let a = rate_rs1(&h, &Precoder::new(Scheme::Rs1Layer, 2, p).unwrap(), 0.3).unwrap();
            let b = rate_rs1(&h, &Precoder::new(Scheme::Rs1Layer, 2, q).unwrap(), 0.3).unwrap();
            for k in 0..2 {
                prop_assert!(b.common_per_user[k] >= a.common_per_user[k]);
                prop_assert!(b.common_per_user[k].is_finite() && b.common_per_user[k] >= 0.0);
            }
            prop_assert_eq!(a.private_rates, b.private_rates);
        }
    }
}
