//! Kernel products `(A⊙B)(r, r′) = A(r, r′)·B(r′, r)` on lattice kernels.

use crate::error::{GwError, Result};
use crate::linalg::{self, CMat};

/// A lattice kernel `K(r_i, r_j)` with its composition measure `h^dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    pub mat: CMat,
    pub weight: f64,
}

impl Kernel {
    pub fn new(mat: CMat, weight: f64) -> Result<Self> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(GwError::Input(format!("kernel weight must be positive, got {weight}")));
        }
        if mat.nrows() != mat.ncols() {
            return Err(GwError::Shape(format!("kernel is {}x{}", mat.nrows(), mat.ncols())));
        }
        if !linalg::is_finite(&mat) {
            return Err(GwError::NonFinite("kernel".into()));
        }
        Ok(Kernel { mat, weight })
    }

    /// Kernel of an operator given by its matrix on nodal values.
    pub fn from_op(op: &CMat, weight: f64) -> Result<Self> {
        Kernel::new(op.unscale(weight), weight)
    }

    /// Matrix of the operator acting on nodal values.
    pub fn to_op(&self) -> CMat {
        self.mat.scale(self.weight)
    }

    /// Operator composition `(AB)(r, r″) = h^dim Σ A(r, r′)B(r′, r″)`.
    pub fn compose(&self, other: &Kernel) -> Result<Kernel> {
        check(self, other)?;
        Kernel::new((&self.mat * &other.mat).scale(self.weight), self.weight)
    }

    pub fn adjoint(&self) -> Kernel {
        Kernel {
            mat: self.mat.adjoint(),
            weight: self.weight,
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }
}

fn check(a: &Kernel, b: &Kernel) -> Result<()> {
    if a.mat.shape() != b.mat.shape() {
        return Err(GwError::Shape(format!("{:?} vs {:?}", a.mat.shape(), b.mat.shape())));
    }
    if a.weight != b.weight {
        return Err(GwError::Shape(format!("weights {} vs {}", a.weight, b.weight)));
    }
    Ok(())
}

/// `C_ij = A_ij·B_ji`.
pub fn odot(a: &Kernel, b: &Kernel) -> Result<Kernel> {
    check(a, b)?;
    Ok(Kernel {
        mat: a.mat.component_mul(&b.mat.transpose()),
        weight: a.weight,
    })
}

/// The second kernel product; on a lattice it has the same formula as [`odot`].
pub fn odot_tilde(a: &Kernel, b: &Kernel) -> Result<Kernel> {
    odot(a, b)
}

/// `‖(A⊙B)* − A*⊙B*‖_max`.
pub fn adjoint_identity_check(a: &Kernel, b: &Kernel) -> Result<f64> {
    let lhs = odot(a, b)?.adjoint();
    let rhs = odot(&a.adjoint(), &b.adjoint())?;
    Ok(linalg::max_abs_diff(&lhs.mat, &rhs.mat))
}

/// Kernel product on operator matrices: the operator whose kernel is the
/// product of the kernels of `a` and `b`, i.e. `a ∘ bᵀ / h^dim`.
pub fn odot_op(a: &CMat, b: &CMat, weight: f64) -> CMat {
    a.component_mul(&b.transpose()).unscale(weight)
}
