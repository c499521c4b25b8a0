use faqmatch_core::evaluation::linspace;

pub const DEFAULT_SPEC: &str = "0:1:101";

/// Parses `T`, `T1,T2,...` or `START:END:COUNT`.
pub fn parse(spec: &str) -> Result<Vec<f64>, String> {
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("bad threshold {s:?}"))
    };
    let values = if let Some((start, rest)) = spec.split_once(':') {
        let (end, count) = rest
            .split_once(':')
            .ok_or_else(|| format!("range {spec:?} must be START:END:COUNT"))?;
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| format!("bad count {count:?}"))?;
        if count == 0 {
            return Err("range count must be positive".into());
        }
        linspace(number(start)?, number(end)?, count)
    } else {
        spec.split(',').map(number).collect::<Result<Vec<_>, _>>()?
    };
    if values.windows(2).any(|w| w[0] > w[1]) {
        return Err("thresholds must be ascending".into());
    }
    Ok(values)
}
