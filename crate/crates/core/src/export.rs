//! Plain CSV rendering. Floats use the shortest round-trip representation,
//! so equal values always produce equal bytes.

use std::fmt::Write;

use nalgebra::DMatrix;

use crate::analytics::CoefficientTable;
use crate::model::SpaceGrid;

fn point_labels(grid: &SpaceGrid) -> Vec<String> {
    grid.points().iter().map(|t| format!("t={t}")).collect()
}

/// Header plus rows, comma separated, newline terminated.
pub fn csv<I, R>(header: &[String], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let mut first = true;
        for field in row {
            if !first {
                out.push(',');
            }
            out.push_str(&field);
            first = false;
        }
        out.push('\n');
    }
    out
}

/// One row per time `k = 1..=n`, one column per grid point.
pub fn paths_csv(values: &DMatrix<f64>, grid: &SpaceGrid) -> String {
    let mut header = vec!["k".to_string()];
    header.extend(point_labels(grid));
    csv(
        &header,
        values.row_iter().enumerate().map(|(k, row)| {
            std::iter::once((k + 1).to_string())
                .chain(row.iter().map(|v| v.to_string()))
                .collect::<Vec<_>>()
        }),
    )
}

/// Square matrix indexed by grid points on both axes.
pub fn matrix_csv(m: &DMatrix<f64>, grid: &SpaceGrid) -> String {
    let labels = point_labels(grid);
    let mut header = vec!["point".to_string()];
    header.extend(labels.iter().cloned());
    csv(
        &header,
        m.row_iter().zip(&labels).map(|(row, label)| {
            std::iter::once(label.clone())
                .chain(row.iter().map(|v| v.to_string()))
                .collect::<Vec<_>>()
        }),
    )
}

/// `z_{n,j}(t_i)` with one row per innovation index `j`.
pub fn coefficients_csv(table: &CoefficientTable, grid: &SpaceGrid) -> String {
    let mut header = vec![format!("j (n={})", table.n())];
    header.extend(point_labels(grid));
    let q = grid.len();
    let first = table.first_index();
    csv(
        &header,
        (0..table.rows()).map(|r| {
            let j = first + r as i64;
            let mut row = vec![j.to_string()];
            row.extend((0..q).map(|i| table.column(i)[r].to_string()));
            row
        }),
    )
}

/// Key/value lines for small scalar summaries.
pub fn key_values(pairs: &[(&str, String)]) -> String {
    let mut out = String::from("key,value\n");
    for (k, v) in pairs {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}
