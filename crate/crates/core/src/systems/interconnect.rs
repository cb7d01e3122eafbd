use std::sync::Arc;

use nalgebra::DMatrix;

use super::FrequencySystem;
use crate::error::{Error, Result};
use crate::{TransferMatrix, C64};

const ILL_POSED_RTOL: f64 = 1e-12;

/// The two wirings used by the benchmark problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    /// Plant `P = [P_z; P_y]` driven by `u + w`; observer `K = [K_u K_y]`
    /// reads `(u, y + v)` and outputs `ẑ`. Closed loop: `(w, u, v) ↦ z − ẑ`.
    ObserverError,
    /// Plant `Φ` driven by `d + u` with `u = K y`. Closed loop:
    /// `d ↦ (y, u) = [I; K] (I − Φ K)⁻¹ Φ`.
    DisturbanceFeedback,
}

/// Error map `[P_z − K_y P_y, P_z − K_u − K_y P_y, −K_y]`.
pub fn observer_error_value(
    pz: &TransferMatrix,
    py: &TransferMatrix,
    ku: &TransferMatrix,
    ky: &TransferMatrix,
) -> TransferMatrix {
    let leak = pz - ky * py;
    let (nz, nu) = pz.shape();
    let ny = py.nrows();
    let mut g = TransferMatrix::zeros(nz, 2 * nu + ny);
    g.columns_mut(0, nu).copy_from(&leak);
    g.columns_mut(nu, nu).copy_from(&(leak - ku));
    g.columns_mut(2 * nu, ny).copy_from(&(-ky));
    g
}

/// Loop solve `(I − Φ K)⁻¹ Φ`, stacked as `[S; K S]`.
pub fn disturbance_feedback_value(phi: &TransferMatrix, k: &TransferMatrix, omega: f64) -> Result<TransferMatrix> {
    let (p, m) = phi.shape();
    let loop_matrix = DMatrix::<C64>::identity(p, p) - phi * k;
    let scale = loop_matrix.iter().fold(1.0_f64, |acc, z| acc.max(z.norm()));
    let lu = loop_matrix.lu();
    let min_pivot = lu.u().diagonal().iter().fold(f64::INFINITY, |acc, z| acc.min(z.norm()));
    if !(min_pivot > ILL_POSED_RTOL * scale) {
        return Err(Error::IllPosedInterconnection { omega });
    }
    let s = lu.solve(phi).ok_or(Error::IllPosedInterconnection { omega })?;
    let mut g = TransferMatrix::zeros(p + m, m);
    g.rows_mut(0, p).copy_from(&s);
    g.rows_mut(p, m).copy_from(&(k * &s));
    Ok(g)
}

/// Closed loop evaluated frequency by frequency.
#[derive(Clone)]
pub struct Interconnection {
    plant: Arc<dyn FrequencySystem>,
    controller: Arc<dyn FrequencySystem>,
    topology: Topology,
    /// number of observed outputs `z` (observer topology only)
    n_z: usize,
}

/// Wires `plant` and `controller` according to `topology`.
///
/// For [`Topology::ObserverError`] the number of estimated outputs is taken
/// from the controller's output dimension; the plant stacks `z` above `y`.
pub fn feedback_interconnect(
    plant: Arc<dyn FrequencySystem>,
    controller: Arc<dyn FrequencySystem>,
    topology: Topology,
) -> Result<Interconnection> {
    let (pp, pm) = plant.dims();
    let (kp, km) = controller.dims();
    let n_z = match topology {
        Topology::ObserverError => {
            let n_z = kp;
            if pp < n_z || km != pm + (pp - n_z) {
                return Err(Error::dim(format!(
                    "observer wiring: plant {pp}x{pm}, observer {kp}x{km}"
                )));
            }
            n_z
        }
        Topology::DisturbanceFeedback => {
            if kp != pm || km != pp {
                return Err(Error::dim(format!(
                    "feedback wiring: plant {pp}x{pm}, controller {kp}x{km}"
                )));
            }
            0
        }
    };
    Ok(Interconnection {
        plant,
        controller,
        topology,
        n_z,
    })
}

impl Interconnection {
    pub fn topology(&self) -> Topology {
        self.topology
    }
}

impl FrequencySystem for Interconnection {
    fn dims(&self) -> (usize, usize) {
        let (pp, pm) = self.plant.dims();
        match self.topology {
            Topology::ObserverError => (self.n_z, 2 * pm + (pp - self.n_z)),
            Topology::DisturbanceFeedback => (pp + pm, pm),
        }
    }

    fn evaluate(&self, omega: f64) -> Result<TransferMatrix> {
        let p = self.plant.evaluate(omega)?;
        let k = self.controller.evaluate(omega)?;
        match self.topology {
            Topology::ObserverError => {
                let (pp, pm) = p.shape();
                let pz = p.rows(0, self.n_z).into_owned();
                let py = p.rows(self.n_z, pp - self.n_z).into_owned();
                let ku = k.columns(0, pm).into_owned();
                let ky = k.columns(pm, pp - self.n_z).into_owned();
                Ok(observer_error_value(&pz, &py, &ku, &ky))
            }
            Topology::DisturbanceFeedback => disturbance_feedback_value(&p, &k, omega),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::AnalyticSystem;
    use super::*;

    fn scalar(v: f64) -> Arc<dyn FrequencySystem> {
        Arc::new(AnalyticSystem::constant(TransferMatrix::from_element(1, 1, C64::new(v, 0.0))))
    }

    #[test]
    fn open_loop_when_controller_is_zero() {
        let g = feedback_interconnect(scalar(0.5), scalar(0.0), Topology::DisturbanceFeedback).unwrap();
        let v = g.evaluate(3.0).unwrap();
        assert_eq!(v.shape(), (2, 1));
        assert_eq!(v[(0, 0)], C64::new(0.5, 0.0));
        assert_eq!(v[(1, 0)], C64::new(0.0, 0.0));
    }

    #[test]
    fn negative_unit_feedback() {
        let g = feedback_interconnect(scalar(0.5), scalar(-1.0), Topology::DisturbanceFeedback).unwrap();
        let v = g.evaluate(0.0).unwrap();
        assert!((v[(0, 0)] - C64::new(1.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!((v[(1, 0)] - C64::new(-1.0 / 3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn singular_loop_is_ill_posed() {
        let g = feedback_interconnect(scalar(0.5), scalar(2.0), Topology::DisturbanceFeedback).unwrap();
        assert!(matches!(g.evaluate(1.0), Err(Error::IllPosedInterconnection { .. })));
    }

    #[test]
    fn observer_wiring_with_zero_observer() {
        let plant: Arc<dyn FrequencySystem> = Arc::new(AnalyticSystem::constant(TransferMatrix::from_column_slice(
            2,
            1,
            &[C64::new(2.0, 1.0), C64::new(-1.0, 0.0)],
        )));
        let observer: Arc<dyn FrequencySystem> = Arc::new(AnalyticSystem::zero((1, 2)));
        let g = feedback_interconnect(plant, observer, Topology::ObserverError).unwrap();
        assert_eq!(g.dims(), (1, 3));
        let v = g.evaluate(1.0).unwrap();
        assert_eq!(v[(0, 0)], C64::new(2.0, 1.0));
        assert_eq!(v[(0, 1)], C64::new(2.0, 1.0));
        assert_eq!(v[(0, 2)], C64::new(0.0, 0.0));
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let plant: Arc<dyn FrequencySystem> = Arc::new(AnalyticSystem::zero((2, 1)));
        let observer: Arc<dyn FrequencySystem> = Arc::new(AnalyticSystem::zero((1, 3)));
        assert!(feedback_interconnect(plant, observer, Topology::ObserverError).is_err());
    }
}
