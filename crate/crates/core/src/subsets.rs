//! Agent-set helpers: bitmask conversion and lexicographic subset order.

/// Bitmask of a set of agent indices (all indices must be below 64).
pub fn mask_of(set: &[usize]) -> u64 {
    set.iter().fold(0u64, |m, &i| m | (1u64 << i))
}

/// Sorted member list of a bitmask.
pub fn members(mask: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    let mut m = mask;
    while m != 0 {
        let i = m.trailing_zeros() as usize;
        out.push(i);
        m &= m - 1;
    }
    out
}

/// All nonempty subsets of `0..n` in lexicographic order of their sorted
/// member lists: {0}, {0,1}, {0,1,2}, ..., {0,2}, ..., {1}, ...
pub fn lexicographic(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        for i in start..n {
            cur.push(i);
            out.push(cur.clone());
            rec(i + 1, n, cur, out);
            cur.pop();
        }
    }
    rec(0, n, &mut cur, &mut out);
    out
}

/// Nonempty submasks of `mask`.
pub fn submasks(mask: u64) -> impl Iterator<Item = u64> {
    let mut sub = mask;
    let mut done = mask == 0;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let cur = sub;
        if sub == 0 {
            return None;
        }
        sub = (sub - 1) & mask;
        if sub == 0 {
            done = true;
        }
        Some(cur)
    })
}

/// True if the sorted member list of `a` precedes that of `b` lexicographically.
pub fn lex_less(a: u64, b: u64) -> bool {
    if a == b {
        return false;
    }
    let d = (a ^ b).trailing_zeros();
    let above = if d == 63 { 0 } else { !((1u64 << (d + 1)) - 1) };
    if a & (1u64 << d) != 0 {
        b & above != 0
    } else {
        a & above == 0
    }
}

/// Parses a comma-separated list of 1-based agent indices into 0-based indices.
pub fn parse_one_based(s: &str, n: usize) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let i: usize = tok.parse().map_err(|_| format!("bad agent index {tok:?}"))?;
        if i == 0 || i > n {
            return Err(format!("agent index {i} out of range 1..={n}"));
        }
        out.push(i - 1);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Every partition of `0..n` into nonempty blocks, each block sorted and
/// blocks ordered by their least member.
pub fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = vec![Vec::new()];
    for i in 0..n {
        let mut next = Vec::new();
        for p in out {
            for b in 0..p.len() {
                let mut q: Vec<Vec<usize>> = p.clone();
                q[b].push(i);
                next.push(q);
            }
            let mut q = p;
            q.push(vec![i]);
            next.push(q);
        }
        out = next;
    }
    out
}

pub fn format_one_based(set: &[usize]) -> String {
    let inner = set.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(",");
    format!("{{{inner}}}")
}
