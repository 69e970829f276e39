//! Debug dump of a buffer: one CSV row per entry.
//!
//! Header: `bucket,observed_return,birth_iteration,theta_0,theta_1,theta_2,theta_3,theta_sha256`.
//! Missing leading coordinates (policies with fewer than four parameters)
//! are left empty.

use std::path::Path;

use udrlpg_core::BucketedBuffer;

use crate::error::{Result, UdrlpgError};
use crate::trainer::theta_digest;

pub fn buffer_csv_string(buffer: &BucketedBuffer) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "bucket",
        "observed_return",
        "birth_iteration",
        "theta_0",
        "theta_1",
        "theta_2",
        "theta_3",
        "theta_sha256",
    ])?;
    for b in 0..buffer.geometry().n_buckets {
        for e in buffer.bucket(b) {
            let mut row = vec![b.to_string(), e.observed_return.to_string(), e.birth_iteration.to_string()];
            row.extend((0..4).map(|i| e.theta.values().get(i).map(|v| v.to_string()).unwrap_or_default()));
            row.push(theta_digest(&e.theta));
            w.write_record(&row)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| UdrlpgError::Invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_buffer_csv(buffer: &BucketedBuffer, path: &Path) -> Result<()> {
    std::fs::write(path, buffer_csv_string(buffer)?).map_err(|e| UdrlpgError::io(path, e))
}
