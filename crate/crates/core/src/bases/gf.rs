//! Arithmetic in GF(4) = GF(2)[ω]/(ω² + ω + 1).
//!
//! Elements are encoded as two bits `b1 b0` meaning b0 + b1·ω, so
//! 0 → 0, 1 → 1, 2 → ω, 3 → ω² = ω + 1.

pub const ZERO: u8 = 0;
pub const ONE: u8 = 1;
pub const OMEGA: u8 = 2;
pub const OMEGA2: u8 = 3;

pub fn add(a: u8, b: u8) -> u8 {
    a ^ b
}

const MUL: [[u8; 4]; 4] = [
    [0, 0, 0, 0],
    [0, 1, 2, 3],
    [0, 2, 3, 1],
    [0, 3, 1, 2],
];

pub fn mul(a: u8, b: u8) -> u8 {
    MUL[a as usize][b as usize]
}

/// Field trace x + x², which lands in GF(2).
pub fn trace(a: u8) -> u8 {
    let t = add(a, mul(a, a));
    debug_assert!(t <= 1);
    t
}

/// Coordinates of `a` in the self-dual basis {ω, ω²}: a = c₀ω + c₁ω²
/// with c_k = tr(a·basis_k).
pub fn coords(a: u8) -> [u8; 2] {
    [trace(mul(a, OMEGA)), trace(mul(a, OMEGA2))]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_axioms() {
        for a in 0..4 {
            assert_eq!(add(a, a), ZERO);
            assert_eq!(mul(a, ONE), a);
            if a != 0 {
                assert!((1..4).any(|b| mul(a, b) == ONE));
            }
            for b in 0..4 {
                assert_eq!(mul(a, b), mul(b, a));
                for c in 0..4 {
                    assert_eq!(mul(a, add(b, c)), add(mul(a, b), mul(a, c)));
                    assert_eq!(mul(a, mul(b, c)), mul(mul(a, b), c));
                }
            }
        }
        assert_eq!(mul(OMEGA, OMEGA), OMEGA2);
        assert_eq!(add(OMEGA2, OMEGA), ONE);
    }

    #[test]
    fn self_dual_basis() {
        let basis = [OMEGA, OMEGA2];
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(trace(mul(basis[i], basis[j])), u8::from(i == j));
            }
        }
        for a in 0..4 {
            let c = coords(a);
            let back = add(mul(c[0], OMEGA), mul(c[1], OMEGA2));
            assert_eq!(back, a);
        }
    }
}
