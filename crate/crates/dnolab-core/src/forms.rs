//! Ordered multi-index algebra for (0,q)-form components.
//!
//! A (0,q)-form is stored through its components `u_J` indexed by strictly
//! increasing tuples `J = (j_1 < … < j_q)` with entries in `1..=n`.  All sign
//! bookkeeping of the ∂̄ / ∂̄* componentwise formulas reduces to permutation
//! parities of the kind
//!
//! ```text
//! ε^{mK}_{K∪{m}} = ω̄_{mK} ⌋ ω̄_{K∪{m}},
//! ```
//!
//! i.e. the sign of sorting the sequence `(m, k_1, …, k_q)` into increasing
//! order (zero when an entry repeats).  This module implements those signs
//! and exhaustively verifies the variable-exchange identity
//!
//! ```text
//! ε^{lJ}_{J∪{l}} · ε^{kJ_k̂∪{l}}_{J∪{l}} = −ε^{lJ_k̂}_{J_k̂∪{l}} · ε^{kJ_k̂}_J
//! ```
//!
//! (for `k ∈ J`, `l ∉ J`) on which the off-diagonal structure of the
//! complex Laplacian rests.
//!
//! Convention: contraction signs are the parity of the permutation sorting
//! the prefixed sequence left-to-right into increasing order.  The identity
//! check pins this orientation choice.

use thiserror::Error;

/// Errors for multi-index construction and sign extraction.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormsError {
    /// An entry lies outside `1..=n`.
    #[error("index entry {entry} outside valid range 1..={n}")]
    OutOfRange { entry: usize, n: usize },
    /// Entries not strictly increasing where an ordered index is required.
    #[error("entries {0:?} are not strictly increasing")]
    NotIncreasing(Vec<usize>),
    /// Deletion of an entry that is not a member.
    #[error("index {k} is not a member of {index:?}")]
    NotMember { k: usize, index: Vec<usize> },
    /// Sequence lengths incompatible for a contraction sign.
    #[error("contraction shape mismatch: |A| = {got}, |B| = {expected}")]
    ShapeMismatch { got: usize, expected: usize },
}

/// Strictly increasing tuple of form indices in `1..=n`; the carrier of all
/// ε-sign combinatorics.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    entries: Vec<usize>,
}

impl MultiIndex {
    /// Builds an ordered multi-index, validating strict monotonicity and the
    /// entry range `1..=n`.
    pub fn new(entries: &[usize], n: usize) -> Result<Self, FormsError> {
        for &e in entries {
            if e < 1 || e > n {
                return Err(FormsError::OutOfRange { entry: e, n });
            }
        }
        if entries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FormsError::NotIncreasing(entries.to_vec()));
        }
        Ok(MultiIndex {
            entries: entries.to_vec(),
        })
    }

    /// The empty index (degree 0).
    pub fn empty() -> Self {
        MultiIndex {
            entries: Vec::new(),
        }
    }

    /// Form degree `q = |J|`.
    pub fn q(&self) -> usize {
        self.entries.len()
    }

    /// The ordered entries.
    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    /// Membership test.
    pub fn contains(&self, k: usize) -> bool {
        self.entries.binary_search(&k).is_ok()
    }

    /// All ordered multi-indices of length `q` with entries in `1..=n`,
    /// in lexicographic order.
    pub fn all(n: usize, q: usize) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut current = Vec::with_capacity(q);
        fn rec(start: usize, n: usize, q: usize, current: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
            if current.len() == q {
                out.push(MultiIndex {
                    entries: current.clone(),
                });
                return;
            }
            for e in start..=n {
                current.push(e);
                rec(e + 1, n, q, current, out);
                current.pop();
            }
        }
        rec(1, n, q, &mut current, &mut out);
        out
    }
}

/// A multi-index together with the parity of the permutation that produced
/// it; `sign = 0` exactly when the generating sequence had a repeated entry
/// (the corresponding form component vanishes).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedIndex {
    /// The sorted index; empty when `sign == 0`.
    pub index: MultiIndex,
    /// Permutation parity in `{−1, 0, +1}`.
    pub sign: i32,
}

/// Parity of the permutation sorting `seq` into increasing order, by
/// inversion count; `None` signals a repeated entry.
fn sort_parity(seq: &[usize]) -> Option<i32> {
    let mut inversions = 0usize;
    for i in 0..seq.len() {
        for j in (i + 1)..seq.len() {
            if seq[i] == seq[j] {
                return None;
            }
            if seq[i] > seq[j] {
                inversions += 1;
            }
        }
    }
    Some(if inversions % 2 == 0 { 1 } else { -1 })
}

/// Sorts an arbitrary index sequence into an ordered multi-index, returning
/// the parity of the sorting permutation (sign 0 on repeated entries).
pub fn normalize_index(seq: &[usize], n: usize) -> Result<SignedIndex, FormsError> {
    for &e in seq {
        if e < 1 || e > n {
            return Err(FormsError::OutOfRange { entry: e, n });
        }
    }
    match sort_parity(seq) {
        None => Ok(SignedIndex {
            index: MultiIndex::empty(),
            sign: 0,
        }),
        Some(sign) => {
            let mut sorted = seq.to_vec();
            sorted.sort_unstable();
            Ok(SignedIndex {
                index: MultiIndex { entries: sorted },
                sign,
            })
        }
    }
}

/// Deletes `k` from `J` (notation `J_k̂`), preserving order.
pub fn remove_index(j: &MultiIndex, k: usize) -> Result<MultiIndex, FormsError> {
    if !j.contains(k) {
        return Err(FormsError::NotMember {
            k,
            index: j.entries.clone(),
        });
    }
    Ok(MultiIndex {
        entries: j.entries.iter().copied().filter(|&e| e != k).collect(),
    })
}

/// Inserts `l` into the ordered index `K`, returning `K∪{l}` with the sign
/// `ε^{lK}_{K∪{l}}` — the parity of moving `l` from the front of `(l, K)`
/// into its sorted position.  Sign 0 when `l ∈ K`.
pub fn insert_index(k_idx: &MultiIndex, l: usize, n: usize) -> Result<SignedIndex, FormsError> {
    if l < 1 || l > n {
        return Err(FormsError::OutOfRange { entry: l, n });
    }
    if k_idx.contains(l) {
        return Ok(SignedIndex {
            index: MultiIndex::empty(),
            sign: 0,
        });
    }
    // l hops over every entry smaller than itself.
    let smaller = k_idx.entries.iter().filter(|&&e| e < l).count();
    let mut entries = k_idx.entries.clone();
    entries.insert(smaller, l);
    Ok(SignedIndex {
        index: MultiIndex { entries },
        sign: if smaller % 2 == 0 { 1 } else { -1 },
    })
}

/// Sign of the permutation taking the (not necessarily ordered) sequence `A`
/// to the ordered index `B`; 0 when `A` is not a permutation of `B`'s
/// entries.  Generalizes `ε` to arbitrary prefixed sequences such as
/// `ω̄_{mK} ⌋ ω̄_{K∪{m}}`.
pub fn contraction_sign(a: &[usize], b: &MultiIndex) -> Result<i32, FormsError> {
    if a.len() != b.q() {
        return Err(FormsError::ShapeMismatch {
            got: a.len(),
            expected: b.q(),
        });
    }
    let parity = match sort_parity(a) {
        None => return Ok(0),
        Some(p) => p,
    };
    let mut sorted = a.to_vec();
    sorted.sort_unstable();
    if sorted != b.entries {
        return Ok(0);
    }
    Ok(parity)
}

/// One failing instance of the ε exchange identity (expected never to occur).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpsilonCounterexample {
    pub j: MultiIndex,
    pub k: usize,
    pub l: usize,
    pub lhs: i32,
    pub rhs: i32,
}

/// Exhaustively tests the exchange identity
/// `ε^{lJ}_{J∪{l}} · ε^{kJ_k̂∪{l}}_{J∪{l}} = −ε^{lJ_k̂}_{J_k̂∪{l}} · ε^{kJ_k̂}_J`
/// over all ordered `J` of length `q` in `1..=n`, all `k ∈ J`, all
/// `l ∉ J`, and returns the (expected empty) list of counterexamples.
pub fn check_epsilon_identity(n: usize, q: usize) -> Vec<EpsilonCounterexample> {
    assert!(q >= 1 && q <= n && n <= 8, "supported range is 1 ≤ q ≤ n ≤ 8");
    let mut bad = Vec::new();
    for j in MultiIndex::all(n, q) {
        for &k in j.entries() {
            for l in 1..=n {
                if j.contains(l) {
                    continue;
                }
                let j_khat = remove_index(&j, k).expect("k ∈ J");
                let j_union_l = insert_index(&j, l, n).expect("range ok");
                let jkl = insert_index(&j_khat, l, n).expect("range ok");
                // ε^{lJ}_{J∪{l}}
                let e1 = j_union_l.sign;
                // ε^{kJ_k̂∪{l}}_{J∪{l}}
                let e2 = insert_index(&jkl.index, k, n).expect("range ok").sign;
                // ε^{lJ_k̂}_{J_k̂∪{l}}
                let e3 = jkl.sign;
                // ε^{kJ_k̂}_J
                let e4 = insert_index(&j_khat, k, n).expect("range ok").sign;
                let lhs = e1 * e2;
                let rhs = -e3 * e4;
                if lhs != rhs {
                    bad.push(EpsilonCounterexample {
                        j: j.clone(),
                        k,
                        l,
                        lhs,
                        rhs,
                    });
                }
            }
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(entries: &[usize], n: usize) -> MultiIndex {
        MultiIndex::new(entries, n).unwrap()
    }

    #[test]
    fn normalize_sorts_with_parity() {
        // one transposition away from sorted
        let s = normalize_index(&[2, 1, 3], 3).unwrap();
        assert_eq!(s.index.entries(), &[1, 2, 3]);
        assert_eq!(s.sign, -1);
        // already ordered
        let s = normalize_index(&[1, 2, 3], 3).unwrap();
        assert_eq!(s.sign, 1);
        // repeated entry kills the component
        let s = normalize_index(&[1, 1, 2], 3).unwrap();
        assert_eq!(s.sign, 0);
        // cyclic shift of three elements is even
        let s = normalize_index(&[3, 1, 2], 3).unwrap();
        assert_eq!(s.sign, 1);
    }

    #[test]
    fn normalize_rejects_out_of_range() {
        assert_eq!(
            normalize_index(&[0, 1], 3),
            Err(FormsError::OutOfRange { entry: 0, n: 3 })
        );
        assert_eq!(
            normalize_index(&[1, 4], 3),
            Err(FormsError::OutOfRange { entry: 4, n: 3 })
        );
    }

    #[test]
    fn remove_preserves_order() {
        assert_eq!(remove_index(&mi(&[1, 3, 4], 5), 3).unwrap().entries(), &[1, 4]);
        assert_eq!(remove_index(&mi(&[2], 5), 2).unwrap().entries(), &[] as &[usize]);
        assert_eq!(remove_index(&mi(&[1, 2, 5], 5), 5).unwrap().entries(), &[1, 2]);
        assert!(matches!(
            remove_index(&mi(&[1, 2], 5), 3),
            Err(FormsError::NotMember { k: 3, .. })
        ));
    }

    #[test]
    fn insert_front_parity() {
        // l = 2 hops over the single smaller entry 1
        let s = insert_index(&mi(&[1, 3], 3), 2, 3).unwrap();
        assert_eq!(s.index.entries(), &[1, 2, 3]);
        assert_eq!(s.sign, -1);
        // l already smallest: no hops
        let s = insert_index(&mi(&[2, 3], 3), 1, 3).unwrap();
        assert_eq!(s.index.entries(), &[1, 2, 3]);
        assert_eq!(s.sign, 1);
        // member: sign 0
        let s = insert_index(&mi(&[1, 2], 3), 2, 3).unwrap();
        assert_eq!(s.sign, 0);
    }

    #[test]
    fn contraction_sign_examples() {
        assert_eq!(contraction_sign(&[2, 1, 3], &mi(&[1, 2, 3], 3)).unwrap(), -1);
        assert_eq!(contraction_sign(&[1, 2], &mi(&[1, 2], 3)).unwrap(), 1);
        assert_eq!(contraction_sign(&[1, 4], &mi(&[1, 3], 4)).unwrap(), 0);
        assert!(matches!(
            contraction_sign(&[1], &mi(&[1, 2], 3)),
            Err(FormsError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn insert_after_remove_reproduces_contraction_sign() {
        for n in 1..=5 {
            for q in 1..=n {
                for j in MultiIndex::all(n, q) {
                    for &k in j.entries() {
                        let j_khat = remove_index(&j, k).unwrap();
                        let reinserted = insert_index(&j_khat, k, n).unwrap();
                        assert_eq!(reinserted.index, j);
                        // prefixed sequence (k, J_k̂) against J
                        let mut seq = vec![k];
                        seq.extend_from_slice(j_khat.entries());
                        let s = contraction_sign(&seq, &j).unwrap();
                        assert_eq!(reinserted.sign, s);
                    }
                }
            }
        }
    }

    #[test]
    fn epsilon_identity_exhaustive() {
        for n in 1..=6 {
            for q in 1..=n {
                let bad = check_epsilon_identity(n, q);
                assert!(bad.is_empty(), "counterexamples at n={n}, q={q}: {bad:?}");
            }
        }
    }

    #[test]
    fn epsilon_identity_vacuous_when_full() {
        // n = q = 2: no l ∉ J ⇒ vacuously empty
        assert!(check_epsilon_identity(2, 2).is_empty());
    }

    #[test]
    fn contraction_sign_is_involutive_under_swaps() {
        // swapping two entries of A flips the sign exactly once
        let b = mi(&[1, 2, 4, 5], 5);
        let a = [4, 1, 5, 2];
        let s0 = contraction_sign(&a, &b).unwrap();
        let mut a2 = a;
        a2.swap(0, 3);
        let s1 = contraction_sign(&a2, &b).unwrap();
        assert_eq!(s0, -s1);
        let mut a3 = a2;
        a3.swap(1, 2);
        let s2 = contraction_sign(&a3, &b).unwrap();
        assert_eq!(s1, -s2);
    }
}
