//! Computational basis states with a fixed number of up spins.
//!
//! A configuration is a `u64` whose bit `b` is 1 when the spin at linear
//! site `b` points up. Both Hamiltonians used here conserve total
//! magnetization, so every state of interest lives in one such sector.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::state::StateVector;

/// Largest chain length accepted by [`SectorBasis::new`].
///
/// Configurations are stored as `u64`, but the limit is set by memory: the
/// half-filled sector at 32 sites already has 6e8 states.
pub const MAX_SITES: usize = 32;

/// Sorted list of all `n_sites`-bit configurations with `n_up` set bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectorBasis {
    n_sites: usize,
    n_up: usize,
    states: Vec<u64>,
}

impl SectorBasis {
    pub fn new(n_sites: usize, n_up: usize) -> Result<Self> {
        if n_sites == 0 || n_sites > MAX_SITES {
            return Err(Error::domain(format!(
                "n_sites = {n_sites} outside 1..={MAX_SITES}"
            )));
        }
        if n_up > n_sites {
            return Err(Error::domain(format!(
                "n_up = {n_up} outside 0..={n_sites}"
            )));
        }
        let count = binomial(n_sites, n_up) as usize;
        let mut states = Vec::with_capacity(count);
        if n_up == 0 {
            states.push(0);
        } else {
            // Gosper's hack walks the fixed-popcount integers in increasing order.
            let limit = 1u64 << n_sites;
            let mut c: u64 = (1u64 << n_up) - 1;
            while c < limit {
                states.push(c);
                let lowest = c & c.wrapping_neg();
                let ripple = c + lowest;
                c = (((ripple ^ c) >> 2) / lowest) | ripple;
            }
        }
        debug_assert_eq!(states.len(), count);
        Ok(Self {
            n_sites,
            n_up,
            states,
        })
    }

    /// Half-filled sector, where the ground states of even modules live.
    pub fn half_filled(n_sites: usize) -> Result<Self> {
        Self::new(n_sites, n_sites / 2)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_up(&self) -> usize {
        self.n_up
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn state(&self, index: usize) -> u64 {
        self.states[index]
    }

    /// Ordinal of `config`, or `None` if it is not in this sector.
    pub fn find(&self, config: u64) -> Option<usize> {
        self.states.binary_search(&config).ok()
    }

    pub fn index_of(&self, config: u64) -> Result<usize> {
        self.find(config).ok_or_else(|| {
            Error::domain(format!(
                "configuration {config:#b} not in sector ({} sites, {} up)",
                self.n_sites, self.n_up
            ))
        })
    }
}

/// Exact binomial coefficient for the small arguments used in sector sizing.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

/// Which module a site belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Placement of two modules on one linear chain.
///
/// Module sites carry 1-based labels. The left module is laid out in order
/// (`1_L -> 0`, `N_L -> N_L-1`), the right one mirrored (`N_R -> N_L`,
/// `1_R -> N-1`), so the two inner ends `N_L`, `N_R` touch across the
/// quench bond and the outer impurities sit at the chain ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiteMap {
    left_size: usize,
    right_size: usize,
}

impl SiteMap {
    pub fn new(left_size: usize, right_size: usize) -> Self {
        Self {
            left_size,
            right_size,
        }
    }

    pub fn left_size(&self) -> usize {
        self.left_size
    }

    pub fn right_size(&self) -> usize {
        self.right_size
    }

    pub fn total(&self) -> usize {
        self.left_size + self.right_size
    }

    /// Linear index of module site `label` (1-based).
    pub fn linear(&self, side: Side, label: usize) -> Result<usize> {
        let size = match side {
            Side::Left => self.left_size,
            Side::Right => self.right_size,
        };
        if label == 0 || label > size {
            return Err(Error::domain(format!(
                "site label {label} outside 1..={size} for {side:?} module"
            )));
        }
        Ok(match side {
            Side::Left => label - 1,
            Side::Right => self.total() - label,
        })
    }

    /// Inverse of [`SiteMap::linear`].
    pub fn label(&self, linear: usize) -> Result<(Side, usize)> {
        if linear >= self.total() {
            return Err(Error::domain(format!(
                "linear site {linear} outside 0..{}",
                self.total()
            )));
        }
        Ok(if linear < self.left_size {
            (Side::Left, linear + 1)
        } else {
            (Side::Right, self.total() - linear)
        })
    }

    /// Places a right-module configuration (bit `i` = label `i+1`) onto the
    /// linear chain.
    pub fn place_right(&self, config: u64) -> u64 {
        let n = self.total();
        let mut out = 0u64;
        for i in 0..self.right_size {
            if config >> i & 1 == 1 {
                out |= 1 << (n - 1 - i);
            }
        }
        out
    }

    pub fn join(&self, left: u64, right: u64) -> u64 {
        left | self.place_right(right)
    }
}

/// Tensor product of a left- and a right-module state on the joint chain.
///
/// The result lives in the sector with `n_up = left.n_up + right.n_up`.
pub fn embed_product_state(left: &StateVector, right: &StateVector) -> Result<StateVector> {
    let lb = left.basis();
    let rb = right.basis();
    let map = SiteMap::new(lb.n_sites(), rb.n_sites());
    if map.total() > MAX_SITES {
        return Err(Error::domain(format!(
            "joint chain of {} sites exceeds {MAX_SITES}",
            map.total()
        )));
    }
    let joint = Arc::new(SectorBasis::new(map.total(), lb.n_up() + rb.n_up())?);
    embed_into(left, right, joint)
}

/// As [`embed_product_state`], into a caller-supplied joint basis.
pub fn embed_into(
    left: &StateVector,
    right: &StateVector,
    joint: Arc<SectorBasis>,
) -> Result<StateVector> {
    let lb = left.basis();
    let rb = right.basis();
    let map = SiteMap::new(lb.n_sites(), rb.n_sites());
    if joint.n_sites() != map.total() || joint.n_up() != lb.n_up() + rb.n_up() {
        return Err(Error::domain(format!(
            "joint basis ({} sites, {} up) does not match modules ({}+{} sites, {}+{} up)",
            joint.n_sites(),
            joint.n_up(),
            lb.n_sites(),
            rb.n_sites(),
            lb.n_up(),
            rb.n_up()
        )));
    }
    let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); joint.len()];
    let placed: Vec<u64> = rb.states().iter().map(|&r| map.place_right(r)).collect();
    for (&l, &al) in lb.states().iter().zip(left.amplitudes()) {
        if al.norm_sqr() == 0.0 {
            continue;
        }
        for (&r, &ar) in placed.iter().zip(right.amplitudes()) {
            let idx = joint.index_of(l | r)?;
            amps[idx] = al * ar;
        }
    }
    StateVector::new(joint, amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C64;

    #[test]
    fn small_sectors() {
        let b = SectorBasis::new(2, 1).unwrap();
        assert_eq!(b.states(), &[0b01, 0b10]);
        assert_eq!(b.index_of(0b01).unwrap(), 0);
        assert_eq!(b.index_of(0b10).unwrap(), 1);
        let b = SectorBasis::new(4, 2).unwrap();
        assert_eq!(b.len(), 6);
        assert_eq!(b.index_of(0b1100).unwrap(), 5);
        assert_eq!(SectorBasis::new(16, 8).unwrap().len(), 12870);
        assert_eq!(SectorBasis::new(5, 0).unwrap().states(), &[0]);
        assert_eq!(SectorBasis::new(5, 5).unwrap().states(), &[0b11111]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(SectorBasis::new(4, 5).is_err());
        assert!(SectorBasis::new(0, 0).is_err());
        assert!(SectorBasis::new(MAX_SITES + 1, 1).is_err());
        let b = SectorBasis::new(4, 2).unwrap();
        assert!(matches!(b.index_of(0b0111), Err(Error::Domain(_))));
    }

    #[test]
    fn sizes_match_binomials() {
        for n in 1..=20 {
            for k in 0..=n {
                let b = SectorBasis::new(n, k).unwrap();
                // Pascal's rule, independent of `binomial`
                let mut row = vec![1u64];
                for _ in 0..n {
                    let mut next = vec![1u64; row.len() + 1];
                    for j in 1..row.len() {
                        next[j] = row[j - 1] + row[j];
                    }
                    row = next;
                }
                assert_eq!(b.len() as u64, row[k]);
                assert!(b.states().windows(2).all(|w| w[0] < w[1]));
                assert!(b.states().iter().all(|s| s.count_ones() as usize == k));
            }
        }
    }

    #[test]
    fn site_map_mirror() {
        let m = SiteMap::new(4, 6);
        assert_eq!(m.linear(Side::Left, 1).unwrap(), 0);
        assert_eq!(m.linear(Side::Left, 4).unwrap(), 3);
        assert_eq!(m.linear(Side::Right, 6).unwrap(), 4);
        assert_eq!(m.linear(Side::Right, 1).unwrap(), 9);
        let mut seen = [false; 10];
        for side in [Side::Left, Side::Right] {
            let size = if side == Side::Left { 4 } else { 6 };
            for label in 1..=size {
                let lin = m.linear(side, label).unwrap();
                assert!(!seen[lin]);
                seen[lin] = true;
                assert_eq!(m.label(lin).unwrap(), (side, label));
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert!(m.linear(Side::Right, 7).is_err());
        assert!(m.linear(Side::Left, 0).is_err());
    }

    #[test]
    fn embed_basis_states() {
        let b2 = Arc::new(SectorBasis::new(2, 1).unwrap());
        let left = StateVector::basis_state(b2.clone(), 0b01).unwrap();
        let right = StateVector::basis_state(b2.clone(), 0b10).unwrap();
        let joint = embed_product_state(&left, &right).unwrap();
        // right label 2 (bit 1) sits at linear N_L = 2
        let idx = joint.basis().index_of(0b0101).unwrap();
        assert!((joint.amplitudes()[idx] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((joint.norm() - 1.0).abs() < 1e-15);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let sup = StateVector::new(b2.clone(), vec![C64::new(s, 0.0), C64::new(s, 0.0)]).unwrap();
        let right = StateVector::basis_state(b2, 0b01).unwrap();
        let joint = embed_product_state(&sup, &right).unwrap();
        let nonzero: Vec<_> = joint
            .amplitudes()
            .iter()
            .filter(|a| a.norm() > 1e-15)
            .collect();
        assert_eq!(nonzero.len(), 2);
        assert!(nonzero.iter().all(|a| (a.re - s).abs() < 1e-15));
    }

    #[test]
    fn embed_rejects_mismatched_joint() {
        let b2 = Arc::new(SectorBasis::new(2, 1).unwrap());
        let v = StateVector::basis_state(b2, 0b01).unwrap();
        let wrong = Arc::new(SectorBasis::new(4, 1).unwrap());
        assert!(embed_into(&v, &v, wrong).is_err());
    }
}
