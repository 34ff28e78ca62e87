use pyo3::prelude::*;

#[pymodule]
fn scope_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
