//! Addresses in the infinite q-ary rooted tree.
//!
//! A vertex of the q-valent tree is a finite digit sequence over {0, ..., q-1};
//! the root is the empty sequence and the children of `w` are `w0, ..., w(q-1)`.
//! Descendant order is the prefix order (reflexive). Everything downstream --
//! implicit cones of presentations, gluing addresses for amalgams, extension
//! targets for the limit engine -- is phrased in these addresses.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported out-valency. Addresses serialize as digit strings
/// ("011"), so digits must stay single characters.
pub const MAX_Q: u8 = 10;

/// A digit sequence addressing a vertex of the q-ary tree. The empty
/// address is the root.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TreeAddress(pub Vec<u8>);

impl TreeAddress {
    pub fn root() -> Self {
        TreeAddress(Vec::new())
    }

    /// Parses a digit string; `""` and `"eps"` both denote the root.
    pub fn parse(s: &str) -> Result<Self> {
        if s.is_empty() || s == "eps" {
            return Ok(Self::root());
        }
        let mut digits = Vec::with_capacity(s.len());
        for ch in s.chars() {
            let d = ch
                .to_digit(10)
                .ok_or_else(|| Error::malformed(format!("address digit out of range: {s:?}")))?;
            digits.push(d as u8);
        }
        Ok(TreeAddress(digits))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The address extended by one digit.
    pub fn child(&self, digit: u8) -> Self {
        let mut digits = self.0.clone();
        digits.push(digit);
        TreeAddress(digits)
    }

    /// The parent address, or `None` at the root.
    pub fn parent(&self) -> Option<Self> {
        if self.0.is_empty() {
            None
        } else {
            Some(TreeAddress(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    /// Both addresses concatenated.
    pub fn join(&self, suffix: &TreeAddress) -> Self {
        let mut digits = self.0.clone();
        digits.extend_from_slice(&suffix.0);
        TreeAddress(digits)
    }

    /// Prefix test; every address is a prefix of itself.
    pub fn is_prefix_of(&self, other: &TreeAddress) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    /// The remainder of `other` below `self`, if `self` is a prefix.
    pub fn strip_prefix(&self, other: &TreeAddress) -> Option<TreeAddress> {
        if self.is_prefix_of(other) {
            Some(TreeAddress(other.0[self.0.len()..].to_vec()))
        } else {
            None
        }
    }

    /// Checks all digits are below `q`.
    pub fn check_valency(&self, q: u8) -> Result<()> {
        match self.0.iter().find(|&&d| d >= q) {
            Some(d) => Err(Error::malformed(format!(
                "address {self} has digit {d} but out-valency is {q}"
            ))),
            None => Ok(()),
        }
    }
}

impl fmt::Display for TreeAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.0 {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for TreeAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            write!(f, "eps")
        } else {
            write!(f, "{self}")
        }
    }
}

impl TryFrom<String> for TreeAddress {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        TreeAddress::parse(&s)
    }
}

impl From<TreeAddress> for String {
    fn from(a: TreeAddress) -> String {
        a.to_string()
    }
}

/// The q children of an address, in digit order.
pub fn children(addr: &TreeAddress, q: u8) -> Vec<TreeAddress> {
    (0..q).map(|d| addr.child(d)).collect()
}

/// Descendant test in the tree: `anc` is an ancestor of (or equal to) `desc`
/// exactly when it is a prefix.
pub fn is_descendant(desc: &TreeAddress, anc: &TreeAddress) -> bool {
    anc.is_prefix_of(desc)
}

/// An address set is independent when the cones below its members are
/// pairwise disjoint, i.e. no member is a prefix of another. The empty set
/// and singletons are independent.
pub fn is_independent_addresses(addrs: &[TreeAddress]) -> bool {
    for (i, a) in addrs.iter().enumerate() {
        for b in &addrs[i + 1..] {
            if a.is_prefix_of(b) || b.is_prefix_of(a) {
                return false;
            }
        }
    }
    true
}

/// All addresses at depth exactly `s` below `addr`.
pub fn descendants_at_depth(addr: &TreeAddress, q: u8, s: usize) -> Vec<TreeAddress> {
    let mut level = vec![addr.clone()];
    for _ in 0..s {
        let mut next = Vec::with_capacity(level.len() * q as usize);
        for a in &level {
            for d in 0..q {
                next.push(a.child(d));
            }
        }
        level = next;
    }
    level
}
