//! Manhattan road grid, vehicle movement along roads and LUAV kinematics.

use rand::Rng;

use crate::config::Scenario;
use crate::cost;
use crate::types::{LuavControl, NodeState, Vec3};

/// Roads per axis; a 4×4 lattice of lines forms a 3×3 block grid.
pub const ROADS_PER_AXIS: usize = 4;
const EPS: f64 = 1e-9;

/// Direction of travel along a road.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dir {
    East,
    North,
    West,
    South,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::East, Dir::North, Dir::West, Dir::South];

    fn unit(self) -> (f64, f64) {
        match self {
            Dir::East => (1.0, 0.0),
            Dir::North => (0.0, 1.0),
            Dir::West => (-1.0, 0.0),
            Dir::South => (0.0, -1.0),
        }
    }

    fn reverse(self) -> Dir {
        match self {
            Dir::East => Dir::West,
            Dir::North => Dir::South,
            Dir::West => Dir::East,
            Dir::South => Dir::North,
        }
    }

    fn horizontal(self) -> bool {
        matches!(self, Dir::East | Dir::West)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadGrid {
    pub side: f64,
    pub spacing: f64,
}

impl RoadGrid {
    pub fn new(side: f64) -> Self {
        Self { side, spacing: side / (ROADS_PER_AXIS - 1) as f64 }
    }

    pub fn line(&self, k: usize) -> f64 {
        if k + 1 == ROADS_PER_AXIS {
            self.side
        } else {
            k as f64 * self.spacing
        }
    }

    pub fn intersections(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for i in 0..ROADS_PER_AXIS {
            for j in 0..ROADS_PER_AXIS {
                out.push((self.line(i), self.line(j)));
            }
        }
        out
    }

    /// Intersections ordered from the area centre outwards.
    pub fn central_intersections(&self) -> Vec<(f64, f64)> {
        let c = self.side / 2.0;
        let mut pts = self.intersections();
        pts.sort_by(|a, b| {
            let da = (a.0 - c).hypot(a.1 - c);
            let db = (b.0 - c).hypot(b.1 - c);
            da.total_cmp(&db).then(a.0.total_cmp(&b.0)).then(a.1.total_cmp(&b.1))
        });
        pts
    }

    fn on_line(&self, coord: f64) -> bool {
        (0..ROADS_PER_AXIS).any(|k| (coord - self.line(k)).abs() < EPS)
    }

    /// Uniform point on the road network with a travel direction along it.
    pub fn random_road_point<R: Rng + ?Sized>(&self, rng: &mut R) -> ((f64, f64), Dir) {
        let horizontal = rng.random_bool(0.5);
        let k = rng.random_range(0..ROADS_PER_AXIS);
        let along = rng.random_range(0.0..=self.side);
        let forward = rng.random_bool(0.5);
        if horizontal {
            ((along, self.line(k)), if forward { Dir::East } else { Dir::West })
        } else {
            ((self.line(k), along), if forward { Dir::North } else { Dir::South })
        }
    }

    /// Distance to the next grid line in direction `dir`, or `None` at the
    /// boundary facing outwards.
    fn to_next_line(&self, pos: (f64, f64), dir: Dir) -> Option<f64> {
        let (coord, sign) = match dir {
            Dir::East => (pos.0, 1.0),
            Dir::West => (pos.0, -1.0),
            Dir::North => (pos.1, 1.0),
            Dir::South => (pos.1, -1.0),
        };
        (0..ROADS_PER_AXIS)
            .map(|k| (self.line(k) - coord) * sign)
            .filter(|&d| d > EPS)
            .min_by(f64::total_cmp)
    }

    fn feasible_turns(&self, pos: (f64, f64), arriving: Dir) -> Vec<Dir> {
        let mut dirs: Vec<Dir> = Dir::ALL
            .into_iter()
            .filter(|&d| d != arriving.reverse())
            .filter(|&d| {
                let on_road = if d.horizontal() { self.on_line(pos.1) } else { self.on_line(pos.0) };
                on_road && self.to_next_line(pos, d).is_some()
            })
            .collect();
        if dirs.is_empty() {
            dirs.push(arriving.reverse());
        }
        dirs
    }

    /// Advance `dist` meters along the roads, turning uniformly at each
    /// intersection crossed. Returns the new position and direction.
    pub fn advance<R: Rng + ?Sized>(
        &self,
        mut pos: (f64, f64),
        mut dir: Dir,
        mut dist: f64,
        rng: &mut R,
    ) -> ((f64, f64), Dir) {
        while dist > 0.0 {
            let Some(gap) = self.to_next_line(pos, dir) else {
                // facing out of the area mid-road: reflect
                dir = dir.reverse();
                continue;
            };
            let (ux, uy) = dir.unit();
            if dist < gap {
                pos = (pos.0 + ux * dist, pos.1 + uy * dist);
                break;
            }
            pos = (pos.0 + ux * gap, pos.1 + uy * gap);
            pos = (self.snap(pos.0), self.snap(pos.1));
            dist -= gap;
            let turns = self.feasible_turns(pos, dir);
            dir = turns[rng.random_range(0..turns.len())];
        }
        ((pos.0.clamp(0.0, self.side), pos.1.clamp(0.0, self.side)), dir)
    }

    fn snap(&self, coord: f64) -> f64 {
        (0..ROADS_PER_AXIS)
            .map(|k| self.line(k))
            .find(|l| (coord - l).abs() < 1e-6)
            .unwrap_or(coord)
    }
}

pub fn move_vehicles<R: Rng + ?Sized>(
    grid: &RoadGrid,
    vehicles: &mut [NodeState],
    headings: &mut [Dir],
    scn: &Scenario,
    rng: &mut R,
) {
    let vc = &scn.cfg.vehicle;
    for (v, dir) in vehicles.iter_mut().zip(headings.iter_mut()) {
        if rng.random_bool(vc.speed_resample_prob) {
            v.velocity = sample_speed(vc.speed_min, vc.speed_max, rng);
        }
        let dist = v.velocity * scn.slot_len;
        let (p, d) = grid.advance((v.position[0], v.position[1]), *dir, dist, rng);
        v.position = [p.0, p.1, 0.0];
        *dir = d;
    }
}

pub fn sample_speed<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Result of moving one LUAV for one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LuavMove {
    pub displacement: f64,
    /// Energy charged against the budget.
    pub energy: f64,
    /// Speed actually flown (0 when depleted).
    pub speed: f64,
}

/// Integrate one LUAV command: clamp speed, fly, clamp into the area and
/// charge propulsion energy. A LUAV with no energy left stays frozen.
pub fn move_luav(luav: &mut NodeState, control: &LuavControl, scn: &Scenario) -> LuavMove {
    if luav.depleted {
        luav.velocity = 0.0;
        return LuavMove { displacement: 0.0, energy: 0.0, speed: 0.0 };
    }
    let u = &scn.cfg.uav;
    let speed = control.speed.clamp(0.0, u.luav_vmax);
    let heading = control.heading.rem_euclid(std::f64::consts::TAU);
    let side = scn.cfg.network.area_side;
    let before: Vec3 = luav.position;
    let step = speed * scn.slot_len;
    luav.position = [
        (before[0] + step * heading.cos()).clamp(0.0, side),
        (before[1] + step * heading.sin()).clamp(0.0, side),
        u.luav_altitude,
    ];
    luav.velocity = speed;
    luav.heading = heading;
    let energy = cost::luav_fly_energy(speed, &u.luav_rotor, scn.slot_len).expect("validated rotor");
    let charged = energy.min(luav.energy_remaining);
    luav.energy_remaining -= charged;
    if luav.energy_remaining <= 0.0 {
        luav.energy_remaining = 0.0;
        luav.depleted = true;
    }
    LuavMove { displacement: crate::types::distance(&before, &luav.position), energy: charged, speed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;
    use crate::types::NodeKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn luav(energy: f64) -> NodeState {
        NodeState {
            id: 0,
            kind: NodeKind::Luav,
            position: [1000.0, 1000.0, 20.0],
            cpu_total: 5e9,
            cpu_remaining: 5e9,
            kappa: 1e-28,
            energy_remaining: energy,
            velocity: 0.0,
            heading: 0.0,
            depleted: false,
        }
    }

    #[test]
    fn straight_segment_displacement() {
        let grid = RoadGrid::new(2000.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // on y = 0 road heading east from x = 100; next line at 666.7
        let (p, d) = grid.advance((100.0, 0.0), Dir::East, 20.0, &mut rng);
        assert_eq!(d, Dir::East);
        assert!((p.0 - 120.0).abs() < 1e-12 && p.1 == 0.0);
        let (p, _) = grid.advance((100.0, 0.0), Dir::East, 0.0, &mut rng);
        assert_eq!(p, (100.0, 0.0));
    }

    #[test]
    fn turns_stay_on_roads_and_in_area() {
        let grid = RoadGrid::new(2000.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut pos, mut dir) = grid.random_road_point(&mut rng);
        for _ in 0..5000 {
            let (p, d) = grid.advance(pos, dir, 137.0, &mut rng);
            assert!((0.0..=2000.0).contains(&p.0) && (0.0..=2000.0).contains(&p.1));
            assert!(grid.on_line(p.0) || grid.on_line(p.1), "{p:?} off road");
            pos = p;
            dir = d;
        }
    }

    #[test]
    fn luav_kinematics() {
        let scn = SimConfig::paper_defaults().validate().unwrap();
        let mut l = luav(1e6);
        let m = move_luav(&mut l, &LuavControl { luav_id: 0, heading: 0.0, speed: 10.0 }, &scn);
        let step = 10.0 * scn.slot_len;
        assert!((l.position[0] - 1000.0 - step).abs() < 1e-9);
        assert!((l.position[1] - 1000.0).abs() < 1e-9);
        assert!((m.displacement - step).abs() < 1e-9);

        let mut l = luav(1e6);
        let m = move_luav(&mut l, &LuavControl { luav_id: 0, heading: 1.0, speed: 0.0 }, &scn);
        assert_eq!(l.position, [1000.0, 1000.0, 20.0]);
        let hover = cost::propulsion_power(0.0, &scn.cfg.uav.luav_rotor).unwrap() * scn.slot_len;
        assert!((m.energy - hover).abs() < 1e-9);

        let mut l = luav(1e6);
        let m = move_luav(&mut l, &LuavControl { luav_id: 0, heading: 0.0, speed: 1e3 }, &scn);
        assert_eq!(m.speed, scn.cfg.uav.luav_vmax);
        assert!(m.displacement <= scn.cfg.uav.luav_vmax * scn.slot_len + 1e-9);
    }

    #[test]
    fn depleted_luav_freezes() {
        let scn = SimConfig::paper_defaults().validate().unwrap();
        let mut l = luav(10.0);
        let m = move_luav(&mut l, &LuavControl { luav_id: 0, heading: 0.0, speed: 5.0 }, &scn);
        assert_eq!(m.energy, 10.0);
        assert!(l.depleted);
        assert_eq!(l.energy_remaining, 0.0);
        let p = l.position;
        let m = move_luav(&mut l, &LuavControl { luav_id: 0, heading: 0.0, speed: 5.0 }, &scn);
        assert_eq!(m.displacement, 0.0);
        assert_eq!(l.position, p);
    }

    #[test]
    fn luav_clamped_to_area() {
        let scn = SimConfig::paper_defaults().validate().unwrap();
        let mut l = luav(1e6);
        l.position = [1999.0, 5.0, 20.0];
        move_luav(&mut l, &LuavControl { luav_id: 0, heading: 0.0, speed: 20.0 }, &scn);
        assert_eq!(l.position[0], 2000.0);
    }
}
