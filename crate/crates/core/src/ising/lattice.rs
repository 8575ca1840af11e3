use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `L x L` lattice of `+-1` spins with free boundaries and a cached
/// interaction statistic `S(y)`, the sum of products over horizontal and
/// vertical neighbour pairs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsingLattice {
    l: usize,
    spins: Vec<i8>,
    cached_s: i64,
}

impl IsingLattice {
    pub fn filled(l: usize, value: i8) -> Self {
        assert!(value == 1 || value == -1, "spins are +-1");
        Self::from_spins(l, vec![value; l * l]).expect("valid spins")
    }

    pub fn random(l: usize, rng: &mut impl Rng) -> Self {
        let spins = (0..l * l).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        Self::from_spins(l, spins).expect("valid spins")
    }

    pub fn from_spins(l: usize, spins: Vec<i8>) -> Result<Self> {
        if l == 0 || spins.len() != l * l {
            return Err(Error::Data(format!("expected {} spins for L = {l}, got {}", l * l, spins.len())));
        }
        if let Some(bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::Data(format!("spin value {bad} is not +-1")));
        }
        let mut lat = Self { l, spins, cached_s: 0 };
        lat.cached_s = lat.recompute_s();
        Ok(lat)
    }

    /// Lattice whose spins are the bits of `code` (bit set = +1), row-major.
    pub fn from_code(l: usize, code: u64) -> Self {
        let spins = (0..l * l).map(|i| if code >> i & 1 == 1 { 1 } else { -1 }).collect();
        Self::from_spins(l, spins).expect("valid spins")
    }

    pub fn code(&self) -> u64 {
        self.spins.iter().enumerate().fold(0, |acc, (i, &s)| acc | (((s == 1) as u64) << i))
    }

    pub fn size(&self) -> usize {
        self.l
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.spins[i * self.l + j]
    }

    /// Cached `S(y)`.
    pub fn suff_stat(&self) -> i64 {
        self.cached_s
    }

    pub fn recompute_s(&self) -> i64 {
        let l = self.l;
        let mut s = 0i64;
        for i in 0..l {
            for j in 0..l {
                let y = self.spins[i * l + j] as i64;
                if j + 1 < l {
                    s += y * self.spins[i * l + j + 1] as i64;
                }
                if i + 1 < l {
                    s += y * self.spins[(i + 1) * l + j] as i64;
                }
            }
        }
        s
    }

    /// Sum of the (up to four) neighbouring spins of site `idx`.
    #[inline]
    pub fn neighbour_sum(&self, idx: usize) -> i32 {
        let l = self.l;
        let j = (idx as u32 % l as u32) as usize;
        let mut k = 0i32;
        if j > 0 {
            k += self.spins[idx - 1] as i32;
        }
        if j + 1 < l {
            k += self.spins[idx + 1] as i32;
        }
        if idx >= l {
            k += self.spins[idx - l] as i32;
        }
        if idx + l < self.spins.len() {
            k += self.spins[idx + l] as i32;
        }
        k
    }

    /// Change in `S` if site `idx` were flipped.
    #[inline]
    pub fn delta_s(&self, idx: usize) -> i64 {
        -2 * self.spins[idx] as i64 * self.neighbour_sum(idx) as i64
    }

    /// Sets site `idx`, keeping the cached statistic current.
    #[inline]
    pub fn set(&mut self, idx: usize, value: i8) {
        if self.spins[idx] != value {
            self.cached_s += self.delta_s(idx);
            self.spins[idx] = value;
        }
    }

    /// Sets site `idx` when its neighbour sum `k` is already known.
    #[inline]
    pub fn set_with_neighbour_sum(&mut self, idx: usize, value: i8, k: i32) {
        let old = self.spins[idx];
        if old != value {
            self.cached_s += (value - old) as i64 * k as i64;
            self.spins[idx] = value;
        }
    }

    pub fn flip(&mut self, idx: usize) {
        let v = -self.spins[idx];
        self.set(idx, v);
    }

    /// True when every site of `self` is at least the corresponding site of `other`.
    pub fn dominates(&self, other: &Self) -> bool {
        self.spins.iter().zip(&other.spins).all(|(a, b)| a >= b)
    }

    /// Plain-text form: `L` on the first line, then `L` rows of `+-1`.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.l);
        for row in self.spins.chunks(self.l) {
            let line: Vec<String> = row.iter().map(|s| s.to_string()).collect();
            writeln!(out, "{}", line.join(" ")).expect("write to string");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|s| !s.is_empty());
        let l: usize = lines
            .next()
            .ok_or_else(|| Error::Data("empty lattice file".into()))?
            .parse()
            .map_err(|e| Error::Data(format!("bad lattice size: {e}")))?;
        let mut spins = Vec::with_capacity(l * l);
        for (r, line) in lines.enumerate() {
            let row: Vec<i8> = line
                .split_whitespace()
                .map(|t| t.parse::<i8>().map_err(|e| Error::Data(format!("row {r}: {e}"))))
                .collect::<Result<_>>()?;
            if row.len() != l {
                return Err(Error::Data(format!("row {r} has {} entries, expected {l}", row.len())));
            }
            spins.extend(row);
        }
        Self::from_spins(l, spins)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_text())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SubstreamKey;

    #[test]
    fn small_statistics() {
        assert_eq!(IsingLattice::filled(2, 1).suff_stat(), 4);
        let checker = IsingLattice::from_spins(2, vec![1, -1, -1, 1]).unwrap();
        assert_eq!(checker.suff_stat(), -4);
        assert_eq!(IsingLattice::filled(1, -1).suff_stat(), 0);
        assert_eq!(IsingLattice::filled(10, 1).suff_stat(), 180);
    }

    #[test]
    fn flip_deltas() {
        let lat = IsingLattice::filled(3, 1);
        assert_eq!(lat.delta_s(4), -8);
        assert_eq!(lat.delta_s(0), -4);
        assert_eq!(lat.delta_s(1), -6);
    }

    #[test]
    fn cached_statistic_tracks_random_flips() {
        let mut rng = SubstreamKey::root(5, 0).rng();
        let mut lat = IsingLattice::random(7, &mut rng);
        for _ in 0..10_000 {
            let idx = rng.random_range(0..49);
            let before = lat.suff_stat();
            let d = lat.delta_s(idx);
            lat.flip(idx);
            assert_eq!(before + d, lat.recompute_s());
            assert_eq!(lat.suff_stat(), lat.recompute_s());
        }
    }

    #[test]
    fn text_round_trip() {
        let mut rng = SubstreamKey::root(6, 0).rng();
        let lat = IsingLattice::random(4, &mut rng);
        assert_eq!(IsingLattice::parse(&lat.to_text()).unwrap(), lat);
        assert!(IsingLattice::parse("2\n1 1\n1 0\n").is_err());
        assert!(IsingLattice::parse("2\n1 1\n").is_err());
    }

    #[test]
    fn code_round_trip() {
        for code in [0u64, 1, 0b1011, 511] {
            assert_eq!(IsingLattice::from_code(3, code).code(), code);
        }
    }
}
