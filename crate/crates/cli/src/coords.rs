//! Text form of tower elements: `[v^K*]c_0;c_1;...`, each coordinate a comma list of
//! `pi`-digit residue codes, in the basis `1, v_n, ..., v_n^(e_n - 1)`.

use std::sync::Arc;

use drl_core::{LaurentNum, TowerElem, TowerLevel};

pub fn parse_element(level: &Arc<TowerLevel>, text: &str) -> Result<TowerElem, String> {
    let text = text.trim();
    let (shift, body) = match text.strip_prefix("v^") {
        Some(rest) => {
            let (k, body) = rest.split_once('*').ok_or_else(|| format!("`{text}`: expected v^K* before the coordinates"))?;
            let k: i64 = k.trim().parse().map_err(|e| format!("exponent `{k}`: {e}"))?;
            (k, body)
        }
        None => (0, text),
    };
    let field = level.field();
    let res = field.residue();
    let parts: Vec<&str> = body.split(';').collect();
    if parts.len() > level.degree() {
        return Err(format!("{} coordinates given, level {} has degree {}", parts.len(), level.n(), level.degree()));
    }
    let mut coords = Vec::with_capacity(level.degree());
    for part in &parts {
        let digits = part
            .split(',')
            .map(|d| {
                let code: u32 = d.trim().parse().map_err(|e| format!("digit `{}`: {e}", d.trim()))?;
                res.from_code(code).ok_or_else(|| format!("digit {code} is not a residue code below {}", res.size()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        coords.push(LaurentNum::from_digits(field, &digits));
    }
    coords.resize_with(level.degree(), || LaurentNum::exact_zero(field));
    let x = TowerElem::from_coords(level, coords).map_err(|e| e.to_string())?;
    Ok(if shift == 0 { x } else { x.mul(&TowerElem::v_pow(level, shift)) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use drl_core::{DrinfeldModule, LocalField, Tower};

    fn tower() -> Tower {
        let f = LocalField::new(2, 1, 1, 32).unwrap();
        Tower::new(Arc::new(DrinfeldModule::carlitz(&f).unwrap()))
    }

    #[test]
    fn shift_and_coordinates() {
        let t = tower();
        let level = t.level(2).unwrap();
        let x = parse_element(&level, "v^3*1;0,1").unwrap();
        assert_eq!(x.valuation().unwrap().map(|r| (*r.numer(), *r.denom())), Some((3, 2)));
        assert!(parse_element(&level, "1").unwrap().eq_to_prec(&TowerElem::one(&level)));
    }

    #[test]
    fn rejects_bad_input() {
        let t = tower();
        let level = t.level(1).unwrap();
        assert!(parse_element(&level, "1;1").is_err());
        assert!(parse_element(&level, "2").is_err());
        assert!(parse_element(&level, "v^x*1").is_err());
        assert!(parse_element(&level, "v^2").is_err());
    }
}
