/// Union-find with union by rank and path compression. Each root tracks
/// its component size and the largest edge weight merged into it.
#[derive(Debug, Clone)]
pub(crate) struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
    size: Vec<usize>,
    internal: Vec<f64>,
}

impl DisjointSet {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
            size: vec![1; n],
            internal: vec![0.0; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    pub(crate) fn size(&self, root: usize) -> usize {
        self.size[root]
    }

    pub(crate) fn internal(&self, root: usize) -> f64 {
        self.internal[root]
    }

    /// Joins two roots over an edge of weight `weight`; returns the new root.
    pub(crate) fn union(&mut self, a: usize, b: usize, weight: f64) -> usize {
        debug_assert!(a != b && self.parent[a] == a && self.parent[b] == b);
        let (root, child) = if self.rank[a] >= self.rank[b] { (a, b) } else { (b, a) };
        if self.rank[root] == self.rank[child] {
            self.rank[root] += 1;
        }
        self.parent[child] = root;
        self.size[root] += self.size[child];
        self.internal[root] = self.internal[root].max(self.internal[child]).max(weight);
        root
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn union_tracks_size_and_internal_weight() {
        let mut ds = DisjointSet::new(4);
        let r = ds.union(0, 1, 2.0);
        let r = ds.union(r, 2, 1.0);
        assert_eq!(ds.size(r), 3);
        assert_eq!(ds.internal(r), 2.0);
        assert_eq!(ds.find(2), ds.find(0));
        assert_ne!(ds.find(3), ds.find(0));
    }
}
