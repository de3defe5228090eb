//! Coflow scheduling on identical parallel networks.
//!
//! A primal-dual pass orders the coflows and yields a lower bound on the
//! optimal total weighted completion time; greedy list scheduling then assigns
//! flows (or whole coflows) to `m` parallel cores and simulates transmission.
//!
//! ```
//! use coflow_core::model::{Coflow, Instance};
//! use coflow_core::primal_dual::order_flow_level;
//! use coflow_core::scheduler::{assign_fdls, simulate};
//!
//! let inst = Instance::new(
//!     1,
//!     1,
//!     vec![
//!         Coflow::new(1, 0, 1.0).with_flow(1, 1, 1),
//!         Coflow::new(2, 0, 2.0).with_flow(1, 1, 1),
//!     ],
//! );
//! let order = order_flow_level(&inst, 0.5).unwrap();
//! let schedule = simulate(&inst, &order, &assign_fdls(&inst, &order).unwrap()).unwrap();
//! assert_eq!(order.order, vec![2, 1]);
//! assert_eq!(schedule.objective, 4.0);
//! assert!(order.dual_cost <= schedule.objective + 1e-9);
//! ```

pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod primal_dual;
pub mod scheduler;
pub mod verify;
pub mod workload;

pub use error::{Error, Result};
pub use model::{compute_loads, Coflow, FlowKey, Instance, PortLoadTable};
pub use primal_dual::{order, order_coflow_level, order_flow_level, Granularity, Permutation};
pub use scheduler::{assign_cdls, assign_fdls, simulate, Assignment, ScheduleResult};
