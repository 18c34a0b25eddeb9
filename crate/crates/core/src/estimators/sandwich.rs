use crate::error::{dim_err, Error, Result};
use crate::numerics::{singular_value_range, Lu, Mat, Scalar};

/// `(V̂ᵀM)⁻¹`, raising `RankDeficient` when the smallest singular value is
/// below `1e-10` times the largest.
pub fn bread<T: Scalar>(v: &Mat<T>, m: &Mat<T>) -> Result<Mat<T>> {
    if v.nrows() != m.nrows() || v.ncols() != m.ncols() {
        return dim_err(format!(
            "V is {}x{}, paired matrix {}x{}",
            v.nrows(),
            v.ncols(),
            m.nrows(),
            m.ncols()
        ));
    }
    let vtm = v.tr_matmul(m)?;
    let (lo, hi) = singular_value_range(&vtm)?;
    if !(hi > T::zero()) || !(lo >= T::lit(1e-10) * hi) {
        return Err(Error::RankDeficient(format!(
            "V'M has singular values in [{}, {}]",
            lo.as_f64(),
            hi.as_f64()
        )));
    }
    Ok(Lu::new(&vtm)?.inverse())
}

/// `Σ Ûᵢ² V̂ᵢ V̂ᵢᵀ`.
pub fn meat<T: Scalar>(v: &Mat<T>, u: &[T]) -> Result<Mat<T>> {
    if v.nrows() != u.len() {
        return dim_err(format!("V has {} rows, U has {}", v.nrows(), u.len()));
    }
    let l = v.ncols();
    let mut out = Mat::zeros(l, l);
    for (i, &ui) in u.iter().enumerate() {
        let w = ui * ui;
        let row = v.row(i);
        for a in 0..l {
            let wa = w * row[a];
            for b in 0..l {
                out[(a, b)] += wa * row[b];
            }
        }
    }
    Ok(out)
}

/// `(V̂ᵀM)⁻¹ (Σ Ûᵢ² V̂ᵢV̂ᵢᵀ) (V̂ᵀM)⁻ᵀ`, symmetrized.
pub fn sandwich_variance<T: Scalar>(v: &Mat<T>, m: &Mat<T>, u: &[T]) -> Result<Mat<T>> {
    let b = bread(v, m)?;
    let mid = meat(v, u)?;
    Ok(b.matmul(&mid)?.matmul(&b.transpose())?.symmetrized())
}
