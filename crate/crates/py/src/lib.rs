use pyo3::prelude::*;

#[pymodule]
fn fronttrack_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
