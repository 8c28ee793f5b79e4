use ced_core::{windows_for, WindowSpec};

/// Parses a trace length into windows: `<N>w` is a raw window count,
/// `<N>m` and `<N>s` are durations that must be whole multiples of the window.
pub fn parse_span(text: &str, window: WindowSpec) -> Result<usize, String> {
    let text = text.trim();
    let split = text.len().saturating_sub(1);
    let (num, unit) = text.split_at(split);
    let n: u64 = num
        .parse()
        .map_err(|_| format!("invalid span `{text}`: expected e.g. 5m, 300s or 60w"))?;
    let windows = match unit {
        "w" => n,
        "s" => windows_for(n, window).map_err(|e| format!("span `{text}`: {e}"))?,
        "m" => windows_for(n * 60, window).map_err(|e| format!("span `{text}`: {e}"))?,
        _ => return Err(format!("invalid span `{text}`: unit must be w, s or m")),
    };
    if windows == 0 {
        return Err(format!("span `{text}` is empty"));
    }
    Ok(windows as usize)
}
