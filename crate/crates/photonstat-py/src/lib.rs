use pyo3::prelude::*;

#[pymodule]
fn _photonstat(_m: &Bound<PyModule>) -> PyResult<()> {
    Ok(())
}
