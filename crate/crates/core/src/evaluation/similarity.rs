//! Gestalt (Ratcliff/Obershelp) string similarity.
//!
//! The longest common contiguous block is found, then the procedure recurses
//! on the unmatched regions left and right of it. Similarity is
//! `2 * matched / (|a| + |b|)` over characters. Ties between equally long
//! blocks go to the earliest start in `a`, then the earliest start in `b`.
//!
//! The greedy procedure depends on argument order, so the pair is put in
//! lexicographic order first; `similarity(a, b) == similarity(b, a)`.

/// Longest common block of `a[alo..ahi]` and `b[blo..bhi]` as
/// `(start_a, start_b, len)`.
fn longest_block(a: &[char], b: &[char], alo: usize, ahi: usize, blo: usize, bhi: usize) -> (usize, usize, usize) {
    let width = bhi - blo;
    let mut prev = vec![0usize; width + 1];
    let mut cur = vec![0usize; width + 1];
    let mut best = (alo, blo, 0);
    for i in alo..ahi {
        for j in blo..bhi {
            let k = j - blo + 1;
            cur[k] = if a[i] == b[j] { prev[k - 1] + 1 } else { 0 };
            let len = cur[k];
            if len > best.2 {
                best = (i + 1 - len, j + 1 - len, len);
            } else if len == best.2 && len > 0 {
                let (si, sj) = (i + 1 - len, j + 1 - len);
                if (si, sj) < (best.0, best.1) {
                    best = (si, sj, len);
                }
            }
        }
        std::mem::swap(&mut prev, &mut cur);
        cur.iter_mut().for_each(|v| *v = 0);
    }
    best
}

/// Total characters covered by the recursive block matching.
pub fn matched_chars(a: &str, b: &str) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut total = 0;
    let mut stack = vec![(0, a.len(), 0, b.len())];
    while let Some((alo, ahi, blo, bhi)) = stack.pop() {
        if alo >= ahi || blo >= bhi {
            continue;
        }
        let (i, j, len) = longest_block(&a, &b, alo, ahi, blo, bhi);
        if len == 0 {
            continue;
        }
        total += len;
        stack.push((alo, i, blo, j));
        stack.push((i + len, ahi, j + len, bhi));
    }
    total
}

/// Similarity in `[0, 1]`; two empty strings are fully similar.
pub fn similarity(a: &str, b: &str) -> f64 {
    let total = a.chars().count() + b.chars().count();
    if total == 0 {
        return 1.0;
    }
    2.0 * matched_chars(a, b) as f64 / total as f64
}
