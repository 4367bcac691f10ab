//! Two-decimal rounding with ties away from zero, done on the shortest
//! decimal representation so that `20.325` rounds to `20.33` even though the
//! nearest double is slightly below it.

/// Formats `x` with exactly two decimals.
pub fn fmt2(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{}", x.abs());
    let (int, frac) = s.split_once('.').unwrap_or((&s, ""));
    let mut digits: Vec<u8> = int.bytes().map(|b| b - b'0').collect();
    let mut f: Vec<u8> = frac.bytes().map(|b| b - b'0').collect();
    f.resize(f.len().max(3), 0);
    let round_up = f[2] >= 5;
    digits.extend_from_slice(&f[..2]);
    if round_up {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, 1);
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let n = digits.len();
    let int_part: String = digits[..n - 2].iter().map(|d| char::from(b'0' + d)).collect();
    let frac_part: String = digits[n - 2..].iter().map(|d| char::from(b'0' + d)).collect();
    let negative = x < 0.0 && digits.iter().any(|&d| d != 0);
    format!("{}{}.{}", if negative { "-" } else { "" }, int_part, frac_part)
}

pub fn round2(x: f64) -> f64 {
    fmt2(x).parse().unwrap_or(x)
}
