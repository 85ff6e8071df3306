//! 4×4 transforms as plain text: four rows of four numbers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mixaug_core::lesion::RigidTransform;
use mixaug_core::linalg::Mat4;

use crate::error::{Error, Result};

pub fn format_matrix(m: &Mat4) -> String {
    let mut s = String::new();
    for row in m {
        let cells: Vec<String> = row.iter().map(|v| format!("{:.9}", v + 0.0)).collect();
        writeln!(s, "{}", cells.join(" ")).unwrap();
    }
    s
}

pub fn parse_matrix(text: &str, path: &Path) -> Result<Mat4> {
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::format(path, format!("not a number: {t:?}")))
        })
        .collect::<Result<_>>()?;
    if values.len() != 16 {
        return Err(Error::format(
            path,
            format!("expected 16 values, found {}", values.len()),
        ));
    }
    Ok(core::array::from_fn(|i| {
        core::array::from_fn(|j| values[4 * i + j])
    }))
}

pub fn write_transform(path: impl AsRef<Path>, t: &RigidTransform) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_matrix(t.matrix())).map_err(|e| Error::io(path, e))
}

pub fn read_transform(path: impl AsRef<Path>) -> Result<RigidTransform> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(RigidTransform::from_matrix(parse_matrix(&text, path)?)?)
}
