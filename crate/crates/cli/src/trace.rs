//! CSV trace output.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use dyntriv::TraceRecord;

pub const HEADER: &str = "step,loss,grad_norm,membership,rebase,wall_ms";

/// 17 significant digits.
fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the trace. `wall_ms` is written as 0 unless `wall_clock` is set,
/// so that identical runs produce identical files.
pub fn write_csv(w: &mut dyn Write, trace: &[TraceRecord], wall_clock: bool) -> io::Result<()> {
    writeln!(w, "{HEADER}")?;
    for r in trace {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.step,
            float(r.loss),
            float(r.grad_norm),
            float(r.membership),
            u8::from(r.post_rebase_loss.is_some()),
            if wall_clock { float(r.wall_ms) } else { "0".to_string() },
        )?;
    }
    Ok(())
}

pub fn write_csv_file(path: &Path, trace: &[TraceRecord], wall_clock: bool) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv(&mut w, trace, wall_clock)?;
    w.flush()
}
