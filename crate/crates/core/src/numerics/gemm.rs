//! Thin safe wrapper over `matrixmultiply::dgemm` for row-major slices.

/// Layout of an operand as stored in memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    /// Stored as given (row-major).
    N,
    /// Stored transposed: the logical `m×k` matrix is a row-major `k×m` buffer.
    T,
}

/// `c = a·b + beta·c` where `a` is logically `m×k`, `b` is `k×n` and `c` is `m×n`.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    op_a: Op,
    b: &[f64],
    op_b: Op,
    beta: f64,
    c: &mut [f64],
) {
    assert_eq!(a.len(), m * k, "gemm: lhs length");
    assert_eq!(b.len(), k * n, "gemm: rhs length");
    assert_eq!(c.len(), m * n, "gemm: output length");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = match op_a {
        Op::N => (k as isize, 1),
        Op::T => (1, m as isize),
    };
    let (rsb, csb) = match op_b {
        Op::N => (n as isize, 1),
        Op::T => (1, k as isize),
    };
    // SAFETY: the length asserts above guarantee every strided access of the
    // m×k, k×n and m×n views stays inside the respective slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
