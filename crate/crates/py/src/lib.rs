use pyo3::prelude::*;

#[pymodule]
fn superhedge_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
