use riskshare::WeightingFunction;

/// `start:stop:step`, inclusive of `stop` up to rounding.
pub fn parse_range(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let [a, b, s] = parts.as_slice() else {
        return Err(format!("range {text:?} is not start:stop:step"));
    };
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("{x:?} in range {text:?} is not a number"));
    let (start, stop, step) = (num(a)?, num(b)?, num(s)?);
    if !(step > 0.0 && step.is_finite()) {
        return Err(format!("range step must be positive, got {step}"));
    }
    if !(start.is_finite() && stop.is_finite() && stop >= start) {
        return Err(format!("range {text:?} must satisfy start <= stop"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

/// `alpha=start:stop:step`; only the Prelec parameter can be swept.
pub fn parse_sweep(text: &str) -> Result<Vec<f64>, String> {
    match text.split_once('=') {
        Some(("alpha", range)) => parse_range(range),
        Some((name, _)) => Err(format!("cannot sweep {name:?}; only alpha is supported")),
        None => Err(format!("sweep {text:?} is not name=start:stop:step")),
    }
}

/// Either a JSON object such as `{"family":"prelec","alpha":0.5}` or the
/// short form `prelec:0.5`, `tk:0.6`, `heu:0.5,0.5`, `linear`.
pub fn parse_weighting(text: &str) -> Result<WeightingFunction, String> {
    let text = text.trim();
    let w = if text.starts_with('{') {
        serde_json::from_str::<WeightingFunction>(text).map_err(|e| format!("bad weighting JSON: {e}"))?
    } else {
        let (family, params) = text.split_once(':').unwrap_or((text, ""));
        let nums = params
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<f64>().map_err(|_| format!("{s:?} is not a number")))
            .collect::<Result<Vec<f64>, String>>()?;
        match (family, nums.as_slice()) {
            ("linear", []) => WeightingFunction::Linear,
            ("prelec", [a]) => WeightingFunction::Prelec { alpha: *a },
            ("tk", [g]) => WeightingFunction::TverskyKahneman { gamma: *g },
            ("heu", [g, k]) => WeightingFunction::Hurwicz { gamma: *g, kappa: *k },
            _ => return Err(format!("unknown weighting {text:?}; try prelec:A, tk:G, heu:G,K or linear")),
        }
    };
    w.validate().map_err(|e| e.to_string())?;
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0:1:0.5").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_range("0.1:0.3:0.1").unwrap().len(), 3);
        assert!(parse_range("0:1:0").is_err());
        assert!(parse_range("1:0:0.1").is_err());
        assert!(parse_range("0:1").is_err());
        assert_eq!(parse_sweep("alpha=1:2:1").unwrap(), vec![1.0, 2.0]);
        assert!(parse_sweep("beta=1:2:1").is_err());
    }

    #[test]
    fn weightings() {
        assert_eq!(parse_weighting("prelec:0.5").unwrap(), WeightingFunction::Prelec { alpha: 0.5 });
        assert_eq!(parse_weighting("heu:0.5, 0.5").unwrap(), WeightingFunction::Hurwicz { gamma: 0.5, kappa: 0.5 });
        assert_eq!(parse_weighting("linear").unwrap(), WeightingFunction::Linear);
        assert_eq!(
            parse_weighting(r#"{"family":"tk","gamma":0.6}"#).unwrap(),
            WeightingFunction::TverskyKahneman { gamma: 0.6 }
        );
        assert!(parse_weighting("prelec:-1").is_err());
        assert!(parse_weighting("cubic:1").is_err());
    }
}
