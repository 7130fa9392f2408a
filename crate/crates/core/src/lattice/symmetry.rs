//! Signed coordinate permutations of Z^d.

/// Canonical representative of the orbit of `x` under signed permutations:
/// absolute values sorted in decreasing order.
pub fn canonical_class(x: &[i64]) -> Vec<u32> {
    let mut c: Vec<u32> = x.iter().map(|v| v.unsigned_abs() as u32).collect();
    c.sort_unstable_by(|a, b| b.cmp(a));
    c
}

/// Number of lattice points in the orbit of a canonical class.
pub fn orbit_size(class: &[u32]) -> u64 {
    let d = class.len();
    let nonzero = class.iter().filter(|&&v| v != 0).count();
    let mut size = factorial(d) << nonzero;
    let mut i = 0;
    while i < d {
        let mut j = i;
        while j < d && class[j] == class[i] {
            j += 1;
        }
        size /= factorial(j - i);
        i = j;
    }
    size
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// All distinct images of `x` under signed coordinate permutations.
pub fn orbit(x: &[i64]) -> Vec<Vec<i64>> {
    let d = x.len();
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..d).collect();
    permute(&mut perm, 0, &mut |p| {
        for signs in 0u32..(1 << d) {
            let img: Vec<i64> = (0..d)
                .map(|i| {
                    let v = x[p[i]];
                    if signs >> i & 1 == 1 {
                        -v
                    } else {
                        v
                    }
                })
                .collect();
            out.push(img);
        }
    });
    out.sort();
    out.dedup();
    out
}

fn permute(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}
