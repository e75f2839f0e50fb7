use super::metrics::MetricRecord;

/// Render records as an aligned console table, grouped by estimator.
pub fn format_report(records: &[MetricRecord]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>8} {:>11} {:>5} {:>12} {:>12} {:>12} {:>12}\n",
        "snr_db", "estimator", "user", "mse_cfo", "mse_channel", "ber", "packet_loss"
    ));
    let mut sorted: Vec<&MetricRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        (a.estimator.to_string(), a.user)
            .cmp(&(b.estimator.to_string(), b.user))
            .then(a.snr_db.partial_cmp(&b.snr_db).unwrap())
    });
    for r in sorted {
        out.push_str(&format!(
            "{:>8} {:>11} {:>5} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}\n",
            r.snr_db, r.estimator, r.user, r.mse_cfo, r.mse_channel, r.ber, r.packet_loss
        ));
    }
    out
}
