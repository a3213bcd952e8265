//! Addressing and geometry of the infinite d-regular tree.
//!
//! A vertex is the sequence of edge labels on the path from the root. The
//! root has children `0..d`, every other vertex has children `0..d-1` (its
//! remaining neighbour is the parent). Ball enumeration uses a dense
//! level index instead: the `i`-th vertex of shell `j` has children
//! `i*(d-1) + c` in shell `j+1` (for `j >= 1`), so per-vertex state can live
//! in flat arrays.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct VertexId {
    path: Vec<u32>,
}

impl VertexId {
    pub fn root() -> Self {
        VertexId { path: Vec::new() }
    }

    pub fn from_path(path: Vec<u32>) -> Self {
        VertexId { path }
    }

    pub fn path(&self) -> &[u32] {
        &self.path
    }

    pub fn depth(&self) -> u32 {
        self.path.len() as u32
    }

    pub fn is_root(&self) -> bool {
        self.path.is_empty()
    }

    pub fn parent(&self) -> Option<VertexId> {
        if self.path.is_empty() {
            None
        } else {
            Some(VertexId {
                path: self.path[..self.path.len() - 1].to_vec(),
            })
        }
    }

    pub fn child(&self, label: u32) -> VertexId {
        let mut path = self.path.clone();
        path.push(label);
        VertexId { path }
    }

    /// True when `self` lies on the path from the root to `other` (inclusive).
    pub fn is_ancestor_of(&self, other: &VertexId) -> bool {
        other.path.starts_with(&self.path)
    }

    /// Depth of the last common ancestor.
    pub fn lca_depth(&self, other: &VertexId) -> u32 {
        self.path
            .iter()
            .zip(&other.path)
            .take_while(|(a, b)| a == b)
            .count() as u32
    }

    pub fn distance(&self, other: &VertexId) -> u32 {
        self.depth() + other.depth() - 2 * self.lca_depth(other)
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            return write!(f, "/");
        }
        for l in &self.path {
            write!(f, "/{l}")?;
        }
        Ok(())
    }
}

impl FromStr for VertexId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "/" {
            return Ok(VertexId::root());
        }
        let rest = s
            .strip_prefix('/')
            .ok_or_else(|| Error::Parse(format!("vertex {s:?} must start with '/'")))?;
        let path = rest
            .split('/')
            .map(|p| p.parse::<u32>().map_err(|_| Error::Parse(format!("bad label {p:?} in {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(VertexId { path })
    }
}

/// Distance between two vertices.
pub fn distance(x: &VertexId, y: &VertexId) -> u32 {
    x.distance(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tree {
    d: u32,
}

impl Tree {
    pub fn new(d: u32) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter(format!("tree degree must be at least 2, got {d}")));
        }
        Ok(Tree { d })
    }

    pub fn degree(&self) -> u32 {
        self.d
    }

    /// Whether every label of `v` is in range for this tree.
    pub fn contains(&self, v: &VertexId) -> bool {
        v.path
            .iter()
            .enumerate()
            .all(|(i, &l)| if i == 0 { l < self.d } else { l < self.d - 1 })
    }

    pub fn child_labels(&self, v: &VertexId) -> u32 {
        if v.is_root() {
            self.d
        } else {
            self.d - 1
        }
    }

    pub fn children(&self, v: &VertexId) -> impl Iterator<Item = VertexId> + '_ {
        let v = v.clone();
        (0..self.child_labels(&v)).map(move |l| v.child(l))
    }

    /// Parent first (when it exists), then children in label order.
    pub fn neighbors(&self, v: &VertexId) -> Vec<VertexId> {
        let mut out = Vec::with_capacity(self.d as usize);
        out.extend(v.parent());
        out.extend(self.children(v));
        out
    }

    /// The unique neighbour of `x` one step closer to `y`.
    pub fn neighbor_toward(&self, x: &VertexId, y: &VertexId) -> Result<VertexId> {
        if x == y {
            return Err(Error::SameVertex);
        }
        if x.is_ancestor_of(y) {
            Ok(x.child(y.path[x.path.len()]))
        } else {
            Ok(x.parent().expect("a non-ancestor of y is never the root"))
        }
    }

    /// `|dB(r)| = d (d-1)^(r-1)` for `r >= 1`, and 1 for `r = 0`.
    pub fn shell_size(&self, r: u32) -> Result<u128> {
        if r == 0 {
            return Ok(1);
        }
        (self.d as u128 - 1)
            .checked_pow(r - 1)
            .and_then(|p| p.checked_mul(self.d as u128))
            .ok_or_else(|| Error::Overflow(format!("shell size for d={} r={r}", self.d)))
    }

    pub fn ball_size(&self, r: u32) -> Result<u128> {
        (0..=r).try_fold(0u128, |acc, j| {
            acc.checked_add(self.shell_size(j)?)
                .ok_or_else(|| Error::Overflow(format!("ball size for r={r}")))
        })
    }

    /// Dense index of `v` within its shell.
    pub fn shell_index(&self, v: &VertexId) -> u64 {
        let mut idx = 0u64;
        for (i, &l) in v.path.iter().enumerate() {
            idx = if i == 0 { l as u64 } else { idx * (self.d as u64 - 1) + l as u64 };
        }
        idx
    }

    /// Inverse of [`Tree::shell_index`].
    pub fn vertex_at(&self, depth: u32, mut idx: u64) -> VertexId {
        let mut path = vec![0u32; depth as usize];
        for j in (0..depth as usize).rev() {
            if j == 0 {
                path[0] = idx as u32;
            } else {
                let b = self.d as u64 - 1;
                path[j] = (idx % b) as u32;
                idx /= b;
            }
        }
        VertexId { path }
    }

    /// Shell index of the ancestor at `to_depth` of the vertex `(depth, idx)`.
    pub fn ancestor_index(&self, depth: u32, idx: u64, to_depth: u32) -> u64 {
        debug_assert!(to_depth <= depth);
        if to_depth == 0 {
            return 0;
        }
        idx / (self.d as u64 - 1).pow(depth - to_depth)
    }

    /// Distance between dense-indexed vertices.
    pub fn dense_distance(&self, a: (u32, u64), b: (u32, u64)) -> u32 {
        let (mut da, mut ia) = a;
        let (mut db, mut ib) = b;
        let b1 = self.d as u64 - 1;
        let mut dist = 0;
        while da > db {
            ia = if da == 1 { 0 } else { ia / b1 };
            da -= 1;
            dist += 1;
        }
        while db > da {
            ib = if db == 1 { 0 } else { ib / b1 };
            db -= 1;
            dist += 1;
        }
        while ia != ib {
            ia = if da == 1 { 0 } else { ia / b1 };
            ib = if db == 1 { 0 } else { ib / b1 };
            da -= 1;
            db -= 1;
            dist += 2;
        }
        dist
    }

    /// All vertices at depth `r`, in dense index order.
    pub fn shell(&self, r: u32) -> Result<impl Iterator<Item = VertexId> + '_> {
        let n = self.shell_size(r)?;
        let n = u64::try_from(n).map_err(|_| Error::Overflow(format!("shell {r}")))?;
        Ok((0..n).map(move |i| self.vertex_at(r, i)))
    }

    /// `T(x, r)`: vertices at distance `floor(r)` below `x` in its subtree.
    pub fn subtree_shell(&self, x: &VertexId, r: f64) -> Result<impl Iterator<Item = VertexId> + '_> {
        if !(r >= 0.0) {
            return Err(Error::InvalidParameter(format!("radius {r}")));
        }
        let k = r.floor() as u32;
        let depth = x.depth() + k;
        let (lo, hi) = if x.is_root() {
            (0u64, u64::try_from(self.shell_size(k)?).map_err(|_| Error::Overflow("subtree shell".into()))?)
        } else {
            let width = (self.d as u64 - 1)
                .checked_pow(k)
                .ok_or_else(|| Error::Overflow("subtree shell".into()))?;
            let base = self.shell_index(x);
            (base * width, (base + 1) * width)
        };
        Ok((lo..hi).map(move |i| self.vertex_at(depth, i)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> VertexId {
        s.parse().unwrap()
    }

    fn ball(tree: &Tree, r: u32) -> Vec<VertexId> {
        // breadth-first enumeration through neighbours, independent of dense indexing
        let mut out = vec![VertexId::root()];
        let mut frontier = vec![VertexId::root()];
        for _ in 0..r {
            let mut next = Vec::new();
            for x in &frontier {
                for y in tree.neighbors(x) {
                    if y.depth() > x.depth() {
                        next.push(y);
                    }
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance(&VertexId::root(), &VertexId::root()), 0);
        assert_eq!(distance(&VertexId::root(), &v("/1/0")), 2);
        assert_eq!(distance(&v("/1/0"), &v("/1/1")), 2);
        assert_eq!(distance(&v("/0"), &v("/1/1")), 3);
    }

    #[test]
    fn string_form() {
        assert_eq!(VertexId::root().to_string(), "/");
        assert_eq!(v("/1/0").path(), &[1, 0]);
        assert_eq!(v("/1/0").to_string(), "/1/0");
        assert!("1/0".parse::<VertexId>().is_err());
        assert!("/a".parse::<VertexId>().is_err());
    }

    #[test]
    fn shell_size_examples() {
        assert_eq!(Tree::new(3).unwrap().shell_size(1).unwrap(), 3);
        assert_eq!(Tree::new(3).unwrap().shell_size(2).unwrap(), 6);
        assert_eq!(Tree::new(4).unwrap().shell_size(3).unwrap(), 36);
        assert_eq!(Tree::new(3).unwrap().shell_size(0).unwrap(), 1);
        assert!(Tree::new(3).unwrap().shell_size(200).is_err());
        let line = Tree::new(2).unwrap();
        for r in 1..20 {
            assert_eq!(line.shell_size(r).unwrap(), 2);
        }
    }

    #[test]
    fn ball_size_matches_enumeration() {
        for d in [2, 3, 4] {
            let tree = Tree::new(d).unwrap();
            for r in 0..=6 {
                let b = ball(&tree, r);
                assert_eq!(b.len() as u128, tree.ball_size(r).unwrap());
                let shell = b.iter().filter(|x| x.depth() == r).count() as u128;
                assert_eq!(shell, tree.shell_size(r).unwrap());
            }
        }
    }

    #[test]
    fn subtree_shell_examples() {
        let t = Tree::new(3).unwrap();
        let root_shell: Vec<_> = t.subtree_shell(&VertexId::root(), 0.0).unwrap().collect();
        assert_eq!(root_shell, vec![VertexId::root()]);
        let x = v("/2");
        let s: Vec<_> = t.subtree_shell(&x, 2.0).unwrap().collect();
        assert_eq!(s.len(), 4);
        let x = v("/2/1");
        let s: Vec<_> = t.subtree_shell(&x, 1.9).unwrap().collect();
        assert_eq!(s.len(), 2);
        for y in &s {
            assert_eq!(y.depth(), 3);
            assert_eq!(y.distance(&x), 1);
            assert!(x.is_ancestor_of(y));
        }
        assert_eq!(t.subtree_shell(&VertexId::root(), 3.0).unwrap().count(), 12);
    }

    #[test]
    fn neighbor_toward_examples() {
        let t = Tree::new(3).unwrap();
        assert_eq!(t.neighbor_toward(&VertexId::root(), &v("/2")).unwrap(), v("/2"));
        assert_eq!(t.neighbor_toward(&v("/0"), &v("/1/1")).unwrap(), VertexId::root());
        assert_eq!(t.neighbor_toward(&v("/1"), &v("/1/0/0")).unwrap(), v("/1/0"));
        assert_eq!(t.neighbor_toward(&v("/1"), &v("/1")), Err(Error::SameVertex));
    }

    /// Exactly one neighbour of x is closer to y, all others are one farther.
    #[test]
    fn toward_step_is_unique() {
        for d in [3, 4] {
            let tree = Tree::new(d).unwrap();
            let b = ball(&tree, 5);
            for x in &b {
                let nbrs = tree.neighbors(x);
                assert_eq!(nbrs.len(), d as usize);
                for y in &b {
                    if x == y {
                        continue;
                    }
                    let dxy = x.distance(y);
                    let mut closer = 0;
                    for z in &nbrs {
                        let dz = z.distance(y);
                        assert!(dz + 1 == dxy || dz == dxy + 1);
                        if dz + 1 == dxy {
                            closer += 1;
                            assert_eq!(*z, tree.neighbor_toward(x, y).unwrap());
                        }
                    }
                    assert_eq!(closer, 1);
                }
            }
        }
    }

    #[test]
    fn dense_index_round_trip() {
        let tree = Tree::new(4).unwrap();
        for x in ball(&tree, 4) {
            let i = tree.shell_index(&x);
            assert_eq!(tree.vertex_at(x.depth(), i), x);
            assert!(tree.contains(&x));
            for j in 0..=x.depth() {
                let anc = VertexId::from_path(x.path()[..j as usize].to_vec());
                assert_eq!(tree.ancestor_index(x.depth(), i, j), tree.shell_index(&anc));
            }
        }
    }

    #[test]
    fn dense_distance_agrees() {
        let tree = Tree::new(3).unwrap();
        let b = ball(&tree, 4);
        for x in &b {
            for y in &b {
                let dx = (x.depth(), tree.shell_index(x));
                let dy = (y.depth(), tree.shell_index(y));
                assert_eq!(tree.dense_distance(dx, dy), x.distance(y));
            }
        }
    }
}
