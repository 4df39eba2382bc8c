//! Words over the local measurement projectors.
//!
//! Letters are projectors `A_x` (party A, outcome 0 of setting x) and `B_y`
//! (party B). Letters of different parties commute, every letter is
//! Hermitian and idempotent, so any product reduces to a canonical word with
//! all A-letters first and no two adjacent equal letters within a party.

/// Canonical product of projectors, A-letters before B-letters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    a_word: Vec<u8>,
    b_word: Vec<u8>,
}

impl Monomial {
    /// The empty word (identity operator).
    pub fn identity() -> Self {
        Self {
            a_word: Vec::new(),
            b_word: Vec::new(),
        }
    }

    /// Single projector of party A, setting `x` in `1..=3`.
    pub fn a(x: u8) -> Self {
        assert!((1..=3).contains(&x));
        Self {
            a_word: vec![x],
            b_word: Vec::new(),
        }
    }

    /// Single projector of party B, setting `y` in `1..=3`.
    pub fn b(y: u8) -> Self {
        assert!((1..=3).contains(&y));
        Self {
            a_word: Vec::new(),
            b_word: vec![y],
        }
    }

    /// Joint projector `A_x B_y`.
    pub fn ab(x: u8, y: u8) -> Self {
        assert!((1..=3).contains(&x) && (1..=3).contains(&y));
        Self {
            a_word: vec![x],
            b_word: vec![y],
        }
    }

    pub fn is_identity(&self) -> bool {
        self.a_word.is_empty() && self.b_word.is_empty()
    }

    pub fn a_word(&self) -> &[u8] {
        &self.a_word
    }

    pub fn b_word(&self) -> &[u8] {
        &self.b_word
    }

    /// Adjoint: reverse each party's word. Letters are Hermitian, so no
    /// conjugation beyond the reversal is needed.
    pub fn adjoint(&self) -> Self {
        let mut a_word = self.a_word.clone();
        let mut b_word = self.b_word.clone();
        a_word.reverse();
        b_word.reverse();
        // Reversal preserves adjacent-distinctness, so this is canonical.
        Self { a_word, b_word }
    }

    /// True if the word equals its own adjoint (its moment is then real).
    pub fn is_self_adjoint(&self) -> bool {
        *self == self.adjoint()
    }
}

impl std::fmt::Display for Monomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_identity() {
            return write!(f, "1");
        }
        for x in &self.a_word {
            write!(f, "A{x}")?;
        }
        for y in &self.b_word {
            write!(f, "B{y}")?;
        }
        Ok(())
    }
}

fn concat_reduced(left: &[u8], right: &[u8]) -> Vec<u8> {
    let mut out: Vec<u8> = Vec::with_capacity(left.len() + right.len());
    for &letter in left.iter().chain(right) {
        if out.last() == Some(&letter) {
            continue; // projector idempotence
        }
        out.push(letter);
    }
    out
}

/// Canonical reduction of `u^dagger v`.
pub fn reduce_word(u: &Monomial, v: &Monomial) -> Monomial {
    let ua = u.adjoint();
    Monomial {
        a_word: concat_reduced(&ua.a_word, &v.a_word),
        b_word: concat_reduced(&ua.b_word, &v.b_word),
    }
}

/// The 16-monomial relaxation basis:
/// `[1, A1..A3, B1..B3, A1B1, A1B2, ..., A3B3]`.
pub fn relaxation_basis() -> Vec<Monomial> {
    let mut basis = Vec::with_capacity(16);
    basis.push(Monomial::identity());
    for x in 1..=3 {
        basis.push(Monomial::a(x));
    }
    for y in 1..=3 {
        basis.push(Monomial::b(y));
    }
    for x in 1..=3 {
        for y in 1..=3 {
            basis.push(Monomial::ab(x, y));
        }
    }
    basis
}
