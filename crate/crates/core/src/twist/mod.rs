//! Area-preserving twist maps, invariant circles, climbing pseudo-orbits
//! and non-shadowability certificates.

pub mod certificate;
pub mod circle;
pub mod embed;
pub mod map;
pub mod pseudo;
pub mod rotation;

pub use certificate::{certify_non_shadowable, circle_separation, CertificateGrid, Conclusion, NonShadowCertificate, DEFAULT_SLACK};
pub use circle::{detect_invariant_circle, CircleDetection, CircleOptions, InvariantCircleEstimate, TransportWitness};
pub use embed::{embed_as_pseudo_geodesic, sample_lipschitz, CoordinateMap, EmbeddedChain, FlatShearMap, SymplecticPolarMap};
pub use map::{annulus_distance, circle_distance, twist_step, TwistFamily, TwistMapParams, TwistPoint, TwistStep};
pub use pseudo::{build_climbing_pseudo_orbit, ClimbOptions, JumpKind, TwistJump, TwistPseudoOrbit, ZoneCrossing};
pub use rotation::{rotation_number, RotationEstimate};
