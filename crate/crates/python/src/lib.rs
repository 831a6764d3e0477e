use pyo3::prelude::*;

#[pymodule]
fn voxfuse(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
