//! Maximal frequent itemset mining over an FP-tree (FP-Max).
//!
//! Items are dense indices. The tree is mined bottom-up through conditional
//! pattern bases; a branch is pruned as soon as its head plus every frequent
//! item of its conditional base is already covered by a known maximal set,
//! and a single-path tree yields its whole path at once.

use std::collections::HashMap;

/// A frequent itemset and its absolute support.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Itemset {
    /// Sorted ascending.
    pub items: Vec<usize>,
    pub support: usize,
}

const ROOT: usize = 0;
const NIL: usize = usize::MAX;

#[derive(Debug)]
struct Node {
    item: usize,
    count: usize,
    parent: usize,
    children: HashMap<usize, usize>,
    next: usize,
}

#[derive(Debug)]
struct FpTree {
    nodes: Vec<Node>,
    /// `(item, support, first node)` ordered by descending support.
    header: Vec<(usize, usize, usize)>,
}

impl FpTree {
    fn build(transactions: &[(Vec<usize>, usize)], min_count: usize) -> FpTree {
        let mut support: HashMap<usize, usize> = HashMap::new();
        for (items, count) in transactions {
            for &i in items {
                *support.entry(i).or_default() += count;
            }
        }
        let mut frequent: Vec<(usize, usize)> = support
            .into_iter()
            .filter(|&(_, s)| s >= min_count)
            .collect();
        frequent.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let rank: HashMap<usize, usize> = frequent
            .iter()
            .enumerate()
            .map(|(r, &(item, _))| (item, r))
            .collect();
        let mut tree = FpTree {
            nodes: vec![Node {
                item: NIL,
                count: 0,
                parent: NIL,
                children: HashMap::new(),
                next: NIL,
            }],
            header: frequent.iter().map(|&(i, s)| (i, s, NIL)).collect(),
        };
        let mut tails: Vec<usize> = vec![NIL; tree.header.len()];
        for (items, count) in transactions {
            let mut path: Vec<usize> = items
                .iter()
                .copied()
                .filter(|i| rank.contains_key(i))
                .collect();
            path.sort_by_key(|i| rank[i]);
            path.dedup();
            let mut cur = ROOT;
            for item in path {
                let next = match tree.nodes[cur].children.get(&item) {
                    Some(&child) => child,
                    None => {
                        let id = tree.nodes.len();
                        tree.nodes.push(Node {
                            item,
                            count: 0,
                            parent: cur,
                            children: HashMap::new(),
                            next: NIL,
                        });
                        tree.nodes[cur].children.insert(item, id);
                        let r = rank[&item];
                        if tails[r] == NIL {
                            tree.header[r].2 = id;
                        } else {
                            tree.nodes[tails[r]].next = id;
                        }
                        tails[r] = id;
                        id
                    }
                };
                tree.nodes[next].count += count;
                cur = next;
            }
        }
        tree
    }

    fn is_empty(&self) -> bool {
        self.header.is_empty()
    }

    /// Items along the only root-to-leaf path, with the leaf count, when the
    /// tree has no branching.
    fn single_path(&self) -> Option<(Vec<usize>, usize)> {
        let mut items = Vec::new();
        let mut cur = ROOT;
        let mut count = usize::MAX;
        loop {
            let node = &self.nodes[cur];
            match node.children.len() {
                0 => return Some((items, count)),
                1 => {
                    let child = *node.children.values().next().expect("one child");
                    items.push(self.nodes[child].item);
                    count = self.nodes[child].count;
                    cur = child;
                }
                _ => return None,
            }
        }
    }

    /// Prefix paths ending just above every node of `item`, weighted by the
    /// node count.
    fn conditional_base(&self, first: usize) -> Vec<(Vec<usize>, usize)> {
        let mut base = Vec::new();
        let mut node = first;
        while node != NIL {
            let mut prefix = Vec::new();
            let mut p = self.nodes[node].parent;
            while p != ROOT {
                prefix.push(self.nodes[p].item);
                p = self.nodes[p].parent;
            }
            if !prefix.is_empty() {
                base.push((prefix, self.nodes[node].count));
            }
            node = self.nodes[node].next;
        }
        base
    }
}

/// Known maximal sets as bitsets for fast subset checks.
struct MaximalSets {
    words: usize,
    sets: Vec<(Vec<u64>, Itemset)>,
}

impl MaximalSets {
    fn bits(&self, items: &[usize]) -> Vec<u64> {
        let mut b = vec![0u64; self.words];
        for &i in items {
            b[i / 64] |= 1 << (i % 64);
        }
        b
    }

    fn covers(&self, items: &[usize]) -> bool {
        let b = self.bits(items);
        self.sets
            .iter()
            .any(|(s, _)| s.iter().zip(&b).all(|(sw, bw)| bw & !sw == 0))
    }

    fn insert(&mut self, mut items: Vec<usize>, support: usize) {
        items.sort_unstable();
        let b = self.bits(&items);
        self.sets
            .retain(|(s, _)| !s.iter().zip(&b).all(|(sw, bw)| sw & !bw == 0));
        self.sets.push((b, Itemset { items, support }));
    }
}

fn mine(
    tree: &FpTree,
    head: &[usize],
    head_support: usize,
    min_count: usize,
    out: &mut MaximalSets,
) {
    if let Some((path, leaf_count)) = tree.single_path() {
        let mut candidate = head.to_vec();
        candidate.extend(&path);
        if candidate.is_empty() {
            return;
        }
        let support = if path.is_empty() {
            head_support
        } else {
            leaf_count
        };
        if !out.covers(&candidate) {
            out.insert(candidate, support);
        }
        return;
    }
    for &(item, support, first) in tree.header.iter().rev() {
        let mut new_head = head.to_vec();
        new_head.push(item);
        let base = tree.conditional_base(first);
        let sub = FpTree::build(&base, min_count);
        let mut bound = new_head.clone();
        bound.extend(sub.header.iter().map(|h| h.0));
        if out.covers(&bound) {
            continue;
        }
        if sub.is_empty() {
            out.insert(new_head, support);
        } else {
            mine(&sub, &new_head, support, min_count, out);
        }
    }
}

/// All maximal itemsets whose support is at least `min_count`, sorted by items.
pub fn fpmax(transactions: &[Vec<usize>], min_count: usize) -> Vec<Itemset> {
    let min_count = min_count.max(1);
    let weighted: Vec<(Vec<usize>, usize)> = transactions.iter().map(|t| (t.clone(), 1)).collect();
    let tree = FpTree::build(&weighted, min_count);
    if tree.is_empty() {
        return Vec::new();
    }
    let max_item = tree.header.iter().map(|h| h.0).max().unwrap_or(0);
    let mut out = MaximalSets {
        words: max_item / 64 + 1,
        sets: Vec::new(),
    };
    mine(&tree, &[], 0, min_count, &mut out);
    let mut sets: Vec<Itemset> = out.sets.into_iter().map(|(_, s)| s).collect();
    sets.sort();
    sets
}

/// Smallest absolute count satisfying a relative support over `n` transactions.
pub fn min_count_for(min_support: f64, n: usize) -> usize {
    let raw = min_support * n as f64;
    // absorb rounding in products like (2/3) * 3
    ((raw - 1e-9).ceil().max(1.0)) as usize
}
