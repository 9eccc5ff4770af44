use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::wrap_angle;

/// An eventually periodic point of `X = (S¹)^ℕ`: a finite head followed by a
/// tail repeated forever.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasePoint {
    head: Vec<f64>,
    tail: Vec<f64>,
}

impl BasePoint {
    pub fn new(head: Vec<f64>, tail: Vec<f64>) -> Result<Self> {
        if tail.is_empty() {
            return Err(Error::invalid("periodic tail must be nonempty"));
        }
        if head.iter().chain(&tail).any(|a| !a.is_finite()) {
            return Err(Error::invalid("angles must be finite"));
        }
        Ok(Self { head: head.into_iter().map(wrap_angle).collect(), tail: tail.into_iter().map(wrap_angle).collect() })
    }

    /// The constant sequence `a^∞`.
    pub fn fixed(a: f64) -> Self {
        Self { head: Vec::new(), tail: vec![wrap_angle(a)] }
    }

    /// A purely periodic point `(t_0 … t_{p-1})^∞`.
    pub fn periodic(tail: Vec<f64>) -> Result<Self> {
        Self::new(Vec::new(), tail)
    }

    pub fn head(&self) -> &[f64] {
        &self.head
    }

    pub fn tail(&self) -> &[f64] {
        &self.tail
    }

    pub fn coord(&self, j: usize) -> f64 {
        if j < self.head.len() {
            self.head[j]
        } else {
            self.tail[(j - self.head.len()) % self.tail.len()]
        }
    }

    pub fn coords(&self, count: usize) -> Vec<f64> {
        (0..count).map(|j| self.coord(j)).collect()
    }

    /// `σx`: drops the first head letter, or rotates the tail.
    pub fn shift(&self) -> Self {
        if self.head.is_empty() {
            let mut tail = self.tail.clone();
            tail.rotate_left(1);
            Self { head: Vec::new(), tail }
        } else {
            Self { head: self.head[1..].to_vec(), tail: self.tail.clone() }
        }
    }

    pub fn shift_by(&self, n: usize) -> Self {
        let mut p = self.clone();
        if n <= p.head.len() {
            p.head.drain(..n);
        } else {
            let r = (n - p.head.len()) % p.tail.len();
            p.head.clear();
            p.tail.rotate_left(r);
        }
        p
    }

    /// `a_n … a_1 x` with `letters = [a_n, …, a_1]`.
    pub fn prepend(&self, letters: &[f64]) -> Self {
        let mut head: Vec<f64> = letters.iter().copied().map(wrap_angle).collect();
        head.extend_from_slice(&self.head);
        Self { head, tail: self.tail.clone() }
    }
}

/// Finite string of letters `a_n … a_1`, optionally completed by a base point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Word {
    letters: Vec<f64>,
    base: Option<BasePoint>,
}

impl Word {
    pub fn new(letters: Vec<f64>, base: Option<BasePoint>) -> Result<Self> {
        if letters.is_empty() && base.is_none() {
            return Err(Error::invalid("word needs letters or a base point"));
        }
        Ok(Self { letters: letters.into_iter().map(wrap_angle).collect(), base })
    }

    pub fn letters(&self) -> &[f64] {
        &self.letters
    }

    pub fn base(&self) -> Option<&BasePoint> {
        self.base.as_ref()
    }

    /// Number of coordinates this word determines, `None` if infinitely many.
    pub fn determined_len(&self) -> Option<usize> {
        match self.base {
            Some(_) => None,
            None => Some(self.letters.len()),
        }
    }

    pub fn coord(&self, j: usize) -> Option<f64> {
        if j < self.letters.len() {
            Some(self.letters[j])
        } else {
            self.base.as_ref().map(|b| b.coord(j - self.letters.len()))
        }
    }

    pub fn to_point(&self) -> Option<BasePoint> {
        self.base.as_ref().map(|b| b.prepend(&self.letters))
    }
}

impl From<BasePoint> for Word {
    fn from(p: BasePoint) -> Self {
        Self { letters: Vec::new(), base: Some(p) }
    }
}
