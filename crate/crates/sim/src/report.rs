use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::campaign::CampaignStats;
use crate::SimError;

pub const CSV_HEADER: &str =
    "method,delta_m,rmse_m,detection_rate,false_alarm_rate,lpd1,lpd2,lp_d,up_d,trials,excluded_trials";

/// Formats `v` with nine significant digits. Plain decimal notation is used
/// for moderate magnitudes, scientific notation otherwise.
pub fn format_sig9(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "NaN".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.8e}");
    let (_, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp) as usize;
        format!("{v:.decimals$}")
    } else {
        sci
    }
}

/// Writes the campaign table to any sink, LF line endings.
pub fn write_csv<W: Write>(stats: &CampaignStats, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for c in &stats.cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            c.method,
            format_sig9(c.delta),
            format_sig9(c.rmse),
            format_sig9(c.detection_rate),
            format_sig9(c.false_alarm_rate),
            format_sig9(c.lpd1),
            format_sig9(c.lpd2),
            format_sig9(c.lp_d),
            format_sig9(c.up_d),
            c.trials,
            c.excluded_trials
        )?;
    }
    out.flush()
}

/// Writes the campaign table to `path`.
pub fn emit_csv(stats: &CampaignStats, path: &Path) -> Result<(), SimError> {
    let io_err = |source| SimError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_csv(stats, BufWriter::new(file)).map_err(io_err)
}
