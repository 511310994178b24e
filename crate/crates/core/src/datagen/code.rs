//! Greedy constant-weight binary codes.

/// `H(ε) = -ε log₂ ε - (1-ε) log₂(1-ε)`.
pub fn binary_entropy(eps: f64) -> f64 {
    if eps <= 0.0 || eps >= 1.0 {
        return 0.0;
    }
    -eps * eps.log2() - (1.0 - eps) * (1.0 - eps).log2()
}

fn binomial(n: usize, r: usize) -> f64 {
    if r > n {
        return 0.0;
    }
    let r = r.min(n - r);
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Lexicographic successor of a sorted support, or `false` when exhausted.
fn next_support(support: &mut [usize], length: usize) -> bool {
    let w = support.len();
    for i in (0..w).rev() {
        if support[i] < length - (w - i) {
            support[i] += 1;
            for j in i + 1..w {
                support[j] = support[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// The maximal code obtained by scanning all weight-`weight` words of the
/// given length in lexicographic order of their supports (`1100 < 1010 <
/// 1001 < 0110 …`) and keeping each word at Hamming distance at least
/// `min_distance` from every word kept so far.
///
/// # Panics
/// If `length > 128`.
pub fn greedy_constant_weight_code(length: usize, weight: usize, min_distance: usize) -> Vec<Vec<u8>> {
    assert!(length <= 128, "codes longer than 128 bits are not supported");
    if weight > length {
        return Vec::new();
    }
    let mut kept: Vec<u128> = Vec::new();
    let mut support: Vec<usize> = (0..weight).collect();
    loop {
        let word = support.iter().fold(0u128, |acc, &p| acc | (1u128 << p));
        if kept
            .iter()
            .all(|&c| (c ^ word).count_ones() as usize >= min_distance)
        {
            kept.push(word);
        }
        if weight == 0 || !next_support(&mut support, length) {
            break;
        }
    }
    kept.into_iter()
        .map(|c| (0..length).map(|p| ((c >> p) & 1) as u8).collect())
        .collect()
}

/// Size of [`greedy_constant_weight_code`].
pub fn gv_count(length: usize, weight: usize, min_distance: usize) -> usize {
    greedy_constant_weight_code(length, weight, min_distance).len()
}

/// `C(L, w) / Σ_{i ≤ ⌊D/2⌋} C(w, i) C(L-w, i)`, a lower bound on any
/// maximal code.
pub fn sphere_covering_bound(length: usize, weight: usize, min_distance: usize) -> f64 {
    let ball: f64 = (0..=min_distance / 2)
        .map(|i| binomial(weight, i) * binomial(length - weight, i))
        .sum();
    binomial(length, weight) / ball
}

/// `(1 / (α 2^{H(ε)}))^k`, the closed-form list size guaranteed by the
/// hypercube construction.
pub fn codeword_bound(k: usize, alpha: f64, eps: f64) -> f64 {
    (1.0 / (alpha * 2f64.powf(binary_entropy(eps)))).powi(k as i32)
}
