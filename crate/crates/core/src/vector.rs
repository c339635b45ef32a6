//! Fixed-capacity vectors for dimensions 1 through 3.
//!
//! Unused trailing components are kept at zero so that dot products and norms
//! can always run over all three slots.

pub type Vector = [f64; 3];
pub type Matrix = [[f64; 3]; 3];

pub const MAX_DIM: usize = 3;

pub const ZERO: Vector = [0.0; 3];

pub fn dot(a: &Vector, b: &Vector) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: &Vector) -> f64 {
    dot(a, a).sqrt()
}

pub fn add(a: &Vector, b: &Vector) -> Vector {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: &Vector, b: &Vector) -> Vector {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: &Vector, s: f64) -> Vector {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Unit vector along `a`, or `None` for the zero vector.
pub fn normalized(a: &Vector) -> Option<Vector> {
    let n = norm(a);
    (n > 0.0 && n.is_finite()).then(|| scale(a, 1.0 / n))
}

/// Build a vector from a slice of length at most 3.
pub fn from_slice(s: &[f64]) -> Vector {
    let mut v = ZERO;
    for (dst, src) in v.iter_mut().zip(s) {
        *dst = *src;
    }
    v
}

pub fn identity() -> Matrix {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

pub fn zero_matrix() -> Matrix {
    [[0.0; 3]; 3]
}

/// `I - e⊗e` restricted to the leading `dim` coordinates.
pub fn projection(e: &Vector, dim: usize) -> Matrix {
    let mut p = zero_matrix();
    for i in 0..dim {
        for j in 0..dim {
            p[i][j] = if i == j { 1.0 } else { 0.0 } - e[i] * e[j];
        }
    }
    p
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut c = zero_matrix();
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn transpose(a: &Matrix) -> Matrix {
    let mut t = zero_matrix();
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

pub fn mat_vec(a: &Matrix, v: &Vector) -> Vector {
    [dot(&a[0], v), dot(&a[1], v), dot(&a[2], v)]
}

/// Frobenius norm.
pub fn frobenius(a: &Matrix) -> f64 {
    a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

/// Complete a unit vector to a right-handed orthonormal frame whose first
/// column is `e`. Columns are returned as rows of the result for convenience:
/// `frame[k]` is the k-th basis vector.
pub fn orthonormal_frame(e: &Vector, dim: usize) -> [Vector; 3] {
    match dim {
        1 => [[e[0].signum(), 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        2 => [[e[0], e[1], 0.0], [-e[1], e[0], 0.0], [0.0, 0.0, 1.0]],
        _ => {
            // Pick the coordinate axis least aligned with e and Gram-Schmidt it.
            let k = (0..3)
                .min_by(|&a, &b| e[a].abs().total_cmp(&e[b].abs()))
                .unwrap_or(0);
            let mut seed = ZERO;
            seed[k] = 1.0;
            let u = normalized(&sub(&seed, &scale(e, dot(&seed, e)))).unwrap_or([0.0, 1.0, 0.0]);
            let w = [
                e[1] * u[2] - e[2] * u[1],
                e[2] * u[0] - e[0] * u[2],
                e[0] * u[1] - e[1] * u[0],
            ];
            [*e, u, w]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_are_orthonormal() {
        for e in [[1.0, 0.0, 0.0], [0.6, 0.8, 0.0], [0.48, 0.6, 0.64]] {
            let dim = if e[2] == 0.0 { 2 } else { 3 };
            let f = orthonormal_frame(&e, dim);
            assert_eq!(f[0], e);
            for i in 0..dim {
                for j in 0..dim {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((dot(&f[i], &f[j]) - expect).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn projection_kills_direction() {
        let e = [0.6, 0.8, 0.0];
        let p = projection(&e, 2);
        let pe = mat_vec(&p, &e);
        assert!(norm(&pe) < 1e-15);
    }
}
