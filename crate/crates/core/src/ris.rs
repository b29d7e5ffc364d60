//! Reflection matrices of single-, group- and fully-connected surfaces.
//!
//! Single-connected surfaces are parameterized by raw phases. Group and
//! fully-connected blocks use the Cayley-type map
//! `Phi = (jX + I)^-1 (jX - I)` of a real symmetric `X`, which is unitary
//! and symmetric for every `X`, so the optimizer can work on an
//! unconstrained parameter vector.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::scalar::{arg, cplx, modulus, CMatrix, Real};

/// Largest `|x|` used when inverting the Cayley map of a phase close to 0.
const PREIMAGE_CLAMP: f64 = 1e7;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RisArchitecture {
    SingleConnected,
    /// Group sizes `M_1..M_S`, summing to `M`.
    GroupConnected(Vec<usize>),
    FullyConnected,
}

impl RisArchitecture {
    /// Partition of the `m` elements of one surface into connected groups.
    pub fn group_sizes(&self, m: usize) -> Result<Vec<usize>> {
        match self {
            RisArchitecture::SingleConnected => Ok(vec![1; m]),
            RisArchitecture::FullyConnected => Ok(if m == 0 { vec![] } else { vec![m] }),
            RisArchitecture::GroupConnected(sizes) => {
                if sizes.contains(&0) {
                    return Err(Error::invalid("group sizes must be positive"));
                }
                let total: usize = sizes.iter().sum();
                if total != m {
                    return Err(Error::invalid(format!(
                        "group sizes {sizes:?} sum to {total}, surface has {m} elements"
                    )));
                }
                Ok(sizes.clone())
            }
        }
    }

    /// Number of real parameters for one surface of `m` elements.
    pub fn params_per_surface(&self, m: usize) -> Result<usize> {
        Ok(match self {
            RisArchitecture::SingleConnected => m,
            _ => self.group_sizes(m)?.iter().map(|s| s * (s + 1) / 2).sum(),
        })
    }
}

impl fmt::Display for RisArchitecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RisArchitecture::SingleConnected => write!(f, "single"),
            RisArchitecture::FullyConnected => write!(f, "fully"),
            RisArchitecture::GroupConnected(sizes) => {
                let s: Vec<String> = sizes.iter().map(|s| s.to_string()).collect();
                write!(f, "group:{}", s.join("+"))
            }
        }
    }
}

impl FromStr for RisArchitecture {
    type Err = Error;

    /// Accepts `single`, `fully` and `group:<sizes>` with sizes separated by
    /// `+` or `,`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "single" => Ok(RisArchitecture::SingleConnected),
            "fully" => Ok(RisArchitecture::FullyConnected),
            other => {
                let sizes = other
                    .strip_prefix("group:")
                    .ok_or_else(|| Error::invalid(format!("unknown RIS architecture '{other}'")))?;
                let sizes = sizes
                    .split(['+', ','])
                    .map(|t| {
                        t.trim()
                            .parse::<usize>()
                            .map_err(|_| Error::invalid(format!("bad group size '{t}'")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if sizes.is_empty() || sizes.contains(&0) {
                    return Err(Error::invalid("group sizes must be positive"));
                }
                Ok(RisArchitecture::GroupConnected(sizes))
            }
        }
    }
}

/// Block-diagonal reflection matrix `blkdiag(Phi_1, .., Phi_L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RisMatrix<T: Real> {
    arch: RisArchitecture,
    elements: usize,
    blocks: Vec<CMatrix<T>>,
    params: Option<Vec<T>>,
}

/// Outcome of [`validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validation<T> {
    pub residual: T,
    pub passed: bool,
}

/// `(jX + I)^-1 (jX - I)` for a real symmetric `X`.
pub fn cayley_block<T: Real>(x: &DMatrix<T>) -> Result<CMatrix<T>> {
    let n = x.nrows();
    if x.ncols() != n {
        return Err(Error::invalid("Cayley block must be square"));
    }
    let scale = x.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let asym = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .fold(T::zero(), |m, (i, j)| m.max((x[(i, j)] - x[(j, i)]).abs()));
    if asym > T::lit(1e-12) * scale {
        return Err(Error::invalid(format!("Cayley block is not symmetric (residual {asym})")));
    }
    let jx = x.map(|v| cplx(T::zero(), v));
    let id = CMatrix::<T>::identity(n, n);
    let plus = &jx + &id;
    let minus = &jx - &id;
    // jX has a purely imaginary spectrum, so jX + I is never singular.
    let phi = plus
        .lu()
        .solve(&minus)
        .ok_or_else(|| Error::Numerical("singular jX + I in Cayley map".into()))?;
    Ok(phi)
}

/// Real symmetric `X` with `cayley_block(X) == phi`, for a unitary symmetric
/// `phi` without eigenvalue `+1`. Diagonal blocks are inverted entrywise with
/// `x = cot(theta/2)`, clamped so phases at 0 map to a close approximant.
pub fn cayley_preimage<T: Real>(phi: &CMatrix<T>) -> Result<DMatrix<T>> {
    let n = phi.nrows();
    let off_diag = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|(i, j)| i != j)
        .fold(T::zero(), |m, (i, j)| m.max(modulus(phi[(i, j)])));
    let clamp = T::lit(PREIMAGE_CLAMP);
    if off_diag <= T::lit(1e-14) {
        return Ok(DMatrix::from_fn(n, n, |i, j| {
            if i != j {
                return T::zero();
            }
            let half = arg(phi[(i, i)]) / T::lit(2.0);
            let (s, c) = (half.sin(), half.cos());
            if s.abs() * clamp <= c.abs() {
                if (s >= T::zero()) == (c >= T::zero()) {
                    clamp
                } else {
                    -clamp
                }
            } else {
                c / s
            }
        }));
    }
    let id = CMatrix::<T>::identity(n, n);
    let minus = phi - &id;
    let plus = phi + &id;
    // X = j (I + Phi)(Phi - I)^-1; the factors commute.
    let inv = minus
        .try_inverse()
        .ok_or_else(|| Error::Numerical("Cayley preimage needs Phi without eigenvalue +1".into()))?;
    let x = (plus * inv) * cplx(T::zero(), T::one());
    Ok(DMatrix::from_fn(n, n, |i, j| {
        (x[(i, j)].re + x[(j, i)].re) / T::lit(2.0)
    }))
}

fn upper_len(s: usize) -> usize {
    s * (s + 1) / 2
}

fn unpack_symmetric<T: Real>(s: usize, params: &[T]) -> DMatrix<T> {
    let mut x = DMatrix::zeros(s, s);
    let mut it = params.iter();
    for i in 0..s {
        for j in i..s {
            let v = *it.next().expect("enough parameters");
            x[(i, j)] = v;
            x[(j, i)] = v;
        }
    }
    x
}

fn pack_symmetric<T: Real>(x: &DMatrix<T>, out: &mut Vec<T>) {
    let s = x.nrows();
    for i in 0..s {
        for j in i..s {
            out.push(x[(i, j)]);
        }
    }
}

impl<T: Real> RisMatrix<T> {
    /// A configuration without any reflecting surface.
    pub fn none() -> Self {
        RisMatrix {
            arch: RisArchitecture::SingleConnected,
            elements: 0,
            blocks: vec![],
            params: Some(vec![]),
        }
    }

    /// `Phi_l = diag(e^{j theta_l})` for each surface.
    pub fn single_connected(thetas: &[DVector<T>]) -> Result<Self> {
        let m = thetas.first().map_or(0, |t| t.len());
        if thetas.iter().any(|t| t.len() != m) {
            return Err(Error::dims("all surfaces need the same number of phases"));
        }
        if thetas.iter().flat_map(|t| t.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("phases must be finite"));
        }
        let params: Vec<T> = thetas.iter().flat_map(|t| t.iter().copied()).collect();
        Self::from_params(&RisArchitecture::SingleConnected, thetas.len(), m, &params)
    }

    /// Each surface is a list of real symmetric blocks mapped through the
    /// Cayley map and placed on the diagonal.
    pub fn group_connected(per_surface: &[Vec<DMatrix<T>>]) -> Result<Self> {
        let sizes: Vec<usize> = per_surface
            .first()
            .map(|bs| bs.iter().map(|b| b.nrows()).collect())
            .unwrap_or_default();
        let mut params = Vec::new();
        for blocks in per_surface {
            let s: Vec<usize> = blocks.iter().map(|b| b.nrows()).collect();
            if s != sizes {
                return Err(Error::dims("all surfaces need the same group sizes"));
            }
            for b in blocks {
                // validated (symmetry) by the Cayley map below
                cayley_block(b)?;
                pack_symmetric(b, &mut params);
            }
        }
        let m = sizes.iter().sum();
        Self::from_params(&RisArchitecture::GroupConnected(sizes), per_surface.len(), m, &params)
    }

    /// One full symmetric `X` per surface.
    pub fn fully_connected(per_surface: &[DMatrix<T>]) -> Result<Self> {
        let m = per_surface.first().map_or(0, |x| x.nrows());
        let mut params = Vec::new();
        for x in per_surface {
            if x.shape() != (m, m) {
                return Err(Error::dims("all surfaces need the same size"));
            }
            cayley_block(x)?;
            pack_symmetric(x, &mut params);
        }
        Self::from_params(&RisArchitecture::FullyConnected, per_surface.len(), m, &params)
    }

    /// Build from the flat unconstrained parameter vector: per surface, the
    /// phases (single-connected) or the row-major upper triangles of each
    /// group's `X`.
    pub fn from_params(
        arch: &RisArchitecture,
        surfaces: usize,
        elements: usize,
        params: &[T],
    ) -> Result<Self> {
        let per = arch.params_per_surface(elements)?;
        if params.len() != per * surfaces {
            return Err(Error::dims(format!(
                "expected {} parameters, got {}",
                per * surfaces,
                params.len()
            )));
        }
        let sizes = arch.group_sizes(elements)?;
        let mut blocks = Vec::with_capacity(surfaces);
        for chunk in params.chunks(per.max(1)).take(surfaces) {
            let block = match arch {
                RisArchitecture::SingleConnected => {
                    let mut phi = CMatrix::<T>::zeros(elements, elements);
                    for (m, &theta) in chunk.iter().enumerate() {
                        phi[(m, m)] = cplx(theta.cos(), theta.sin());
                    }
                    phi
                }
                _ => {
                    let mut phi = CMatrix::<T>::zeros(elements, elements);
                    let (mut offset, mut p) = (0, 0);
                    for &s in &sizes {
                        let x = unpack_symmetric(s, &chunk[p..p + upper_len(s)]);
                        let b = cayley_block(&x)?;
                        phi.view_mut((offset, offset), (s, s)).copy_from(&b);
                        offset += s;
                        p += upper_len(s);
                    }
                    phi
                }
            };
            blocks.push(block);
        }
        if per == 0 {
            blocks = vec![CMatrix::<T>::zeros(elements, elements); surfaces];
        }
        Ok(RisMatrix {
            arch: arch.clone(),
            elements,
            blocks,
            params: Some(params.to_vec()),
        })
    }

    /// Wrap raw per-surface blocks without checking them; use [`validate`].
    pub fn from_blocks(arch: RisArchitecture, blocks: Vec<CMatrix<T>>) -> Result<Self> {
        let m = blocks.first().map_or(0, |b| b.nrows());
        if blocks.iter().any(|b| b.shape() != (m, m)) {
            return Err(Error::dims("RIS blocks must all be M x M"));
        }
        Ok(RisMatrix {
            arch,
            elements: m,
            blocks,
            params: None,
        })
    }

    pub fn architecture(&self) -> &RisArchitecture {
        &self.arch
    }

    pub fn surfaces(&self) -> usize {
        self.blocks.len()
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn dim(&self) -> usize {
        self.surfaces() * self.elements
    }

    pub fn blocks(&self) -> &[CMatrix<T>] {
        &self.blocks
    }

    /// Unconstrained parameters, if the matrix was built from them.
    pub fn params(&self) -> Option<&[T]> {
        self.params.as_deref()
    }

    /// The assembled `L*M x L*M` block-diagonal matrix.
    pub fn phi(&self) -> CMatrix<T> {
        let m = self.elements;
        let mut out = CMatrix::<T>::zeros(self.dim(), self.dim());
        for (l, b) in self.blocks.iter().enumerate() {
            out.view_mut((l * m, l * m), (m, m)).copy_from(b);
        }
        out
    }

    /// Same blocks tagged with a different architecture, for validating a
    /// matrix against a weaker class.
    pub fn redeclared(&self, arch: RisArchitecture) -> Self {
        RisMatrix {
            arch,
            elements: self.elements,
            blocks: self.blocks.clone(),
            params: None,
        }
    }

    /// Express this matrix through the parameters of `arch`. Every block of
    /// the target partition must be block-diagonal-compatible with `self`;
    /// phases at exactly 0 are approximated.
    pub fn reparameterize(&self, arch: &RisArchitecture) -> Result<Self> {
        let m = self.elements;
        let sizes = arch.group_sizes(m)?;
        let mut params = Vec::new();
        for block in &self.blocks {
            if *arch == RisArchitecture::SingleConnected {
                for i in 0..m {
                    params.push(arg(block[(i, i)]));
                }
                continue;
            }
            let mut offset = 0;
            for &s in &sizes {
                let sub = block.view((offset, offset), (s, s)).into_owned();
                let x = cayley_preimage(&sub)?;
                pack_symmetric(&x, &mut params);
                offset += s;
            }
        }
        Self::from_params(arch, self.surfaces(), m, &params)
    }
}

/// Maximum constraint residual of `ris` for its declared architecture.
pub fn validate<T: Real>(ris: &RisMatrix<T>, tol: T) -> Validation<T> {
    let m = ris.elements;
    let sizes = match ris.arch.group_sizes(m) {
        Ok(s) => s,
        Err(_) => {
            return Validation {
                residual: T::max_value().unwrap_or(T::one()),
                passed: false,
            }
        }
    };
    let mut group_of = Vec::with_capacity(m);
    for (g, &s) in sizes.iter().enumerate() {
        group_of.extend(std::iter::repeat_n(g, s));
    }
    let mut residual = T::zero();
    for block in &ris.blocks {
        for i in 0..m {
            for j in 0..m {
                if group_of[i] != group_of[j] {
                    residual = residual.max(modulus(block[(i, j)]));
                }
            }
        }
        if ris.arch == RisArchitecture::SingleConnected {
            for i in 0..m {
                residual = residual.max((modulus(block[(i, i)]) - T::one()).abs());
            }
            continue;
        }
        let mut offset = 0;
        for &s in &sizes {
            let b = block.view((offset, offset), (s, s));
            let unitary = (b.adjoint() * b - CMatrix::<T>::identity(s, s)).norm();
            let symmetric = (b - b.transpose()).norm();
            residual = residual.max(unitary).max(symmetric);
            offset += s;
        }
    }
    Validation {
        residual,
        passed: residual <= tol,
    }
}

/// Composite channels `h_d,k + (h_r,k^H Phi G)^H`, one column per user.
pub fn effective_channels<T: Real>(ch: &ChannelSet<T>, ris: &RisMatrix<T>) -> Result<CMatrix<T>> {
    ch.check_shapes()?;
    if ch.ris_dim() != ris.dim() {
        return Err(Error::dims(format!(
            "channel has {} reflecting rows, RIS has dimension {}",
            ch.ris_dim(),
            ris.dim()
        )));
    }
    let mut h = ch.direct.clone();
    let m = ris.elements;
    for (l, phi) in ris.blocks.iter().enumerate() {
        let g = ch.ap_ris.rows(l * m, m);
        let hr = ch.ris_user.rows(l * m, m);
        // G_l^H Phi_l^H H_r,l
        h += g.adjoint() * (phi.adjoint() * hr);
    }
    Ok(h)
}

/// Uniform random phases in `[0, 2pi)` or standard normal symmetric `X`.
pub fn random_params<T: Real, R: rand::Rng + ?Sized>(
    arch: &RisArchitecture,
    surfaces: usize,
    elements: usize,
    rng: &mut R,
) -> Result<Vec<T>> {
    use rand_distr::{Distribution, StandardNormal};
    let per = arch.params_per_surface(elements)?;
    let n = per * surfaces;
    Ok(match arch {
        RisArchitecture::SingleConnected => (0..n)
            .map(|_| T::lit(rng.random::<f64>() * std::f64::consts::TAU))
            .collect(),
        _ => {
            // Off-diagonal entries are the average of two independent normals,
            // matching a symmetrized i.i.d. matrix.
            let sizes = arch.group_sizes(elements)?;
            let mut out = Vec::with_capacity(n);
            for _ in 0..surfaces {
                for &s in &sizes {
                    for i in 0..s {
                        for j in i..s {
                            let a: f64 = StandardNormal.sample(rng);
                            let v = if i == j {
                                a
                            } else {
                                let b: f64 = StandardNormal.sample(rng);
                                (a + b) / 2.0
                            };
                            out.push(T::lit(v));
                        }
                    }
                }
            }
            out
        }
    })
}
