//! The function syntax accepted by `--fn`:
//! `poly:c0,c1,...`, `expneg:rate`, `abs:center`, `sqrt1p`.

use baskakov::FunctionSpec;

pub fn parse_function(text: &str) -> Result<FunctionSpec, String> {
    let (head, body) = match text.split_once(':') {
        Some((h, b)) => (h, Some(b)),
        None => (text, None),
    };
    match (head, body) {
        ("poly", Some(body)) => {
            let coefficients = body
                .split(',')
                .map(|tok| number(tok, text))
                .collect::<Result<Vec<f64>, String>>()?;
            FunctionSpec::polynomial(coefficients).map_err(|e| format!("{e} in '{text}'"))
        }
        ("expneg", Some(body)) => {
            FunctionSpec::exp_decay(number(body, text)?).map_err(|e| format!("{e} in '{text}'"))
        }
        ("abs", Some(body)) => {
            FunctionSpec::abs_shift(number(body, text)?).map_err(|e| format!("{e} in '{text}'"))
        }
        ("sqrt1p", None) => Ok(FunctionSpec::sqrt1p()),
        ("poly" | "expneg" | "abs", None) => Err(format!("'{head}' needs an argument, as in '{head}:...'")),
        ("sqrt1p", Some(_)) => Err(format!("'sqrt1p' takes no argument, got '{text}'")),
        _ => Err(format!(
            "unknown function '{head}'; expected poly:, expneg:, abs: or sqrt1p"
        )),
    }
}

fn number(tok: &str, whole: &str) -> Result<f64, String> {
    let t = tok.trim();
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("invalid number '{t}' in '{whole}'")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use baskakov::FunctionKind;

    #[test]
    fn accepts_each_kind() {
        let p = parse_function("poly:0,1").unwrap();
        assert_eq!(p.kind(), &FunctionKind::Polynomial { coefficients: vec![0.0, 1.0] });
        assert_eq!(parse_function("expneg:2").unwrap().eval(0.5), (-1.0f64).exp());
        assert_eq!(parse_function("abs:1").unwrap().eval(0.25), 0.75);
        assert_eq!(parse_function("sqrt1p").unwrap().eval(3.0), 2.0);
        assert_eq!(parse_function("poly: 1, -2.5").unwrap().eval(2.0), -4.0);
    }

    #[test]
    fn errors_name_the_token() {
        let e = parse_function("poly:1,x,3").unwrap_err();
        assert!(e.contains("'x'"), "{e}");
        let e = parse_function("cosh:1").unwrap_err();
        assert!(e.contains("'cosh'"), "{e}");
        let e = parse_function("expneg:fast").unwrap_err();
        assert!(e.contains("'fast'"), "{e}");
        assert!(parse_function("poly:").unwrap_err().contains("''"));
        assert!(parse_function("abs").is_err());
        assert!(parse_function("sqrt1p:2").is_err());
        assert!(parse_function("expneg:-1").is_err());
        assert!(parse_function("abs:-1").is_err());
    }
}
