use super::{
    Action, Bomb, CellKind, EnvError, GameState, Outcome, Pos, PowerUp, BOMB_LIFE, FLAME_LIFE,
    MAX_CELLS, NUM_AGENTS,
};

/// One bomb going off.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Explosion {
    pub origin: Pos,
    pub owner: usize,
    pub cells: Vec<Pos>,
}

/// What [`GameState::advance`] reports about the transition it applied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    pub rewards: [f32; NUM_AGENTS],
    pub terminal: bool,
    pub outcome: Option<Outcome>,
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub next_state: GameState,
    pub rewards: [f32; NUM_AGENTS],
    pub terminal: bool,
    pub outcome: Option<Outcome>,
    pub explosions: Vec<Explosion>,
}

/// Cells covered by `bomb`'s blast: the origin plus up to `blast_radius - 1`
/// cells in each cardinal direction. Rays stop before rigid walls and stop on
/// (and include) wood.
pub fn blast_cells(state: &GameState, bomb: &Bomb) -> Vec<Pos> {
    let mut cells = Vec::with_capacity(1 + 4 * bomb.blast_radius as usize);
    for_each_blast_cell(state, bomb.pos, bomb.blast_radius, |p| cells.push(p));
    cells
}

#[inline]
pub(crate) fn for_each_blast_cell(state: &GameState, origin: Pos, radius: u8, mut f: impl FnMut(Pos)) {
    f(origin);
    let size = state.size();
    for dir in super::Direction::ALL {
        let mut p = origin;
        for _ in 1..radius {
            let Some(next) = p.shifted(dir, size) else { break };
            match state.cell(next).kind {
                CellKind::Rigid => break,
                CellKind::Wood => {
                    f(next);
                    break;
                }
                CellKind::Passage => f(next),
            }
            p = next;
        }
    }
}

impl GameState {
    /// Applies one joint action and returns the successor state.
    pub fn step(&self, actions: [Action; NUM_AGENTS]) -> Result<StepResult, EnvError> {
        let mut next = self.clone();
        let mut explosions = Vec::new();
        let info = next.advance_logged(actions, Some(&mut explosions))?;
        Ok(StepResult {
            next_state: next,
            rewards: info.rewards,
            terminal: info.terminal,
            outcome: info.outcome,
            explosions,
        })
    }

    /// Same as [`GameState::step`] with raw action indices.
    pub fn step_indices(&self, actions: [usize; NUM_AGENTS]) -> Result<StepResult, EnvError> {
        self.step([Action::from_index(actions[0])?, Action::from_index(actions[1])?])
    }

    /// In-place variant of [`GameState::step`].
    pub fn advance(&mut self, actions: [Action; NUM_AGENTS]) -> Result<StepInfo, EnvError> {
        self.advance_logged(actions, None)
    }

    fn advance_logged(
        &mut self,
        actions: [Action; NUM_AGENTS],
        mut log: Option<&mut Vec<Explosion>>,
    ) -> Result<StepInfo, EnvError> {
        if self.outcome.is_some() {
            return Err(EnvError::Terminal);
        }

        self.decay_flames();
        self.resolve_explosions(&mut log);
        self.move_agents(actions);
        self.place_bombs(actions);
        self.slide_bombs();
        self.pick_up_powerups();
        self.kill_agents_in_flames();

        self.timestep += 1;
        let outcome = match (self.agents[0].alive, self.agents[1].alive) {
            (false, false) => Some(Outcome::Tie),
            (true, false) => Some(Outcome::Win(0)),
            (false, true) => Some(Outcome::Win(1)),
            (true, true) if self.timestep >= self.max_steps => Some(Outcome::Tie),
            (true, true) => None,
        };
        self.outcome = outcome;
        Ok(StepInfo {
            rewards: outcome.map_or([0.0; NUM_AGENTS], Outcome::rewards),
            terminal: outcome.is_some(),
            outcome,
        })
    }

    fn decay_flames(&mut self) {
        let n = self.size() * self.size();
        for life in &mut self.flames[..n] {
            *life = life.saturating_sub(1);
        }
    }

    fn resolve_explosions(&mut self, log: &mut Option<&mut Vec<Explosion>>) {
        if self.bombs.is_empty() {
            return;
        }
        for bomb in self.bombs.iter_mut() {
            bomb.fuse = bomb.fuse.saturating_sub(1);
        }
        let triggered = |s: &Self, b: &Bomb| b.fuse == 0 || s.flames[s.index(b.pos)] > 0;
        if !self.bombs.iter().any(|b| triggered(self, b)) {
            return;
        }
        let mut exploding = vec![false; self.bombs.len()];
        let mut queue = Vec::new();
        for (i, bomb) in self.bombs.iter().enumerate() {
            if triggered(self, bomb) {
                exploding[i] = true;
                queue.push(i);
            }
        }

        // Chain reaction over the pre-explosion board: every bomb inside a
        // blast goes off in the same step.
        let mut blasts: Vec<(usize, Vec<Pos>)> = Vec::new();
        while let Some(i) = queue.pop() {
            let cells = blast_cells(self, &self.bombs[i]);
            for (j, other) in self.bombs.iter().enumerate() {
                if !exploding[j] && cells.contains(&other.pos) {
                    exploding[j] = true;
                    queue.push(j);
                }
            }
            blasts.push((i, cells));
        }
        blasts.sort_by_key(|(i, _)| *i);

        let mut burned_wood = [false; MAX_CELLS];
        for (_, cells) in &blasts {
            for &p in cells {
                let idx = self.index(p);
                if self.grid[idx].kind == CellKind::Wood {
                    burned_wood[idx] = true;
                }
            }
        }
        for (i, cells) in &blasts {
            for &p in cells {
                let idx = self.index(p);
                self.flames[idx] = FLAME_LIFE;
                let cell = &mut self.grid[idx];
                if burned_wood[idx] {
                    // The hidden power-up (if any) is revealed.
                    cell.kind = CellKind::Passage;
                } else {
                    cell.powerup = None;
                }
            }
            let bomb = self.bombs[*i];
            if let Some(owner) = self.agents.get_mut(bomb.owner) {
                owner.ammo = owner.ammo.saturating_add(1);
            }
            if let Some(log) = log.as_deref_mut() {
                log.push(Explosion { origin: bomb.pos, owner: bomb.owner, cells: cells.clone() });
            }
        }

        let mut k = 0;
        self.bombs.retain(|_| {
            let keep = !exploding[k];
            k += 1;
            keep
        });
    }

    /// Where an agent would go with `action`, ignoring the other agent. Kicks
    /// are reported as the index of the bomb being pushed.
    fn intended_move(&self, agent: usize, action: Action) -> (Pos, Option<usize>) {
        let a = &self.agents[agent];
        let Some(dir) = action.direction() else { return (a.pos, None) };
        let Some(target) = a.pos.shifted(dir, self.size()) else { return (a.pos, None) };
        if self.cell(target).kind != CellKind::Passage {
            return (a.pos, None);
        }
        match self.bombs.iter().position(|b| b.pos == target) {
            None => (target, None),
            Some(bi) if a.can_kick => {
                let beyond = target.shifted(dir, self.size());
                let free = beyond.is_some_and(|p| {
                    self.cell(p).kind == CellKind::Passage
                        && self.bomb_at(p).is_none()
                        && self.agent_at(p).is_none()
                });
                if free {
                    (target, Some(bi))
                } else {
                    (a.pos, None)
                }
            }
            Some(_) => (a.pos, None),
        }
    }

    /// Moves agents simultaneously. Same-target moves and head-on swaps both
    /// bounce; moving into an agent that ends up staying also bounces.
    fn move_agents(&mut self, actions: [Action; NUM_AGENTS]) {
        let mut target = [Pos::new(0, 0); NUM_AGENTS];
        let mut kick = [None; NUM_AGENTS];
        for i in 0..NUM_AGENTS {
            if self.agents[i].alive {
                let (t, k) = self.intended_move(i, actions[i]);
                target[i] = t;
                kick[i] = k;
            } else {
                target[i] = self.agents[i].pos;
            }
        }
        let start = [self.agents[0].pos, self.agents[1].pos];
        let both_alive = self.agents[0].alive && self.agents[1].alive;
        if both_alive {
            let moving = |t: &[Pos; 2], i: usize| t[i] != start[i];
            if moving(&target, 0) && moving(&target, 1) && target[0] == target[1] {
                target = start;
            }
            if target[0] == start[1] && target[1] == start[0] {
                target = start;
            }
            // Following into a cell the other agent vacates is fine; walking
            // into one it keeps is not. Two passes settle the two-agent case.
            for _ in 0..2 {
                for i in 0..NUM_AGENTS {
                    let j = 1 - i;
                    if target[i] != start[i] && target[i] == target[j] {
                        target[i] = start[i];
                    }
                }
            }
        }

        for i in 0..NUM_AGENTS {
            if target[i] != start[i] {
                self.agents[i].pos = target[i];
                if let (Some(bi), Some(dir)) = (kick[i], actions[i].direction()) {
                    self.bombs[bi].moving = Some(dir);
                }
            }
        }
    }

    fn place_bombs(&mut self, actions: [Action; NUM_AGENTS]) {
        for i in 0..NUM_AGENTS {
            let a = self.agents[i];
            if !a.alive || actions[i] != Action::Bomb || a.ammo == 0 || self.bomb_at(a.pos).is_some() {
                continue;
            }
            self.bombs.push(Bomb { pos: a.pos, fuse: BOMB_LIFE, blast_radius: a.blast_radius, owner: i, moving: None });
            self.agents[i].ammo -= 1;
        }
    }

    fn slide_bombs(&mut self) {
        for bi in 0..self.bombs.len() {
            let Some(dir) = self.bombs[bi].moving else { continue };
            let next = self.bombs[bi].pos.shifted(dir, self.size());
            let open = next.filter(|&p| {
                self.cell(p).kind == CellKind::Passage && self.bomb_at(p).is_none() && self.agent_at(p).is_none()
            });
            match open {
                Some(p) => self.bombs[bi].pos = p,
                None => self.bombs[bi].moving = None,
            }
        }
    }

    fn pick_up_powerups(&mut self) {
        for i in 0..NUM_AGENTS {
            if !self.agents[i].alive {
                continue;
            }
            let idx = self.index(self.agents[i].pos);
            let Some(kind) = self.grid[idx].powerup.take() else { continue };
            let a = &mut self.agents[i];
            match kind {
                PowerUp::ExtraBomb => a.ammo = a.ammo.saturating_add(1),
                PowerUp::BlastRadius => a.blast_radius = a.blast_radius.saturating_add(1),
                PowerUp::Kick => a.can_kick = true,
            }
        }
    }

    fn kill_agents_in_flames(&mut self) {
        for i in 0..NUM_AGENTS {
            if self.agents[i].alive && self.flames[self.index(self.agents[i].pos)] > 0 {
                self.agents[i].alive = false;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{AgentAttr, Cell, Direction};
    use super::*;

    fn open_board() -> GameState {
        GameState::empty(8, [Pos::new(0, 0), Pos::new(7, 7)]).unwrap()
    }

    const STOP: [Action; 2] = [Action::Stop, Action::Stop];

    #[test]
    fn blast_in_open_board_is_a_plus() {
        let s = open_board();
        let bomb = Bomb { pos: Pos::new(3, 3), fuse: 5, blast_radius: 2, owner: 0, moving: None };
        let mut cells = blast_cells(&s, &bomb);
        cells.sort();
        assert_eq!(
            cells,
            vec![Pos::new(2, 3), Pos::new(3, 2), Pos::new(3, 3), Pos::new(3, 4), Pos::new(4, 3)]
        );
    }

    #[test]
    fn rigid_blocks_and_wood_burns() {
        let mut s = open_board();
        s.set_cell(Pos::new(3, 4), Cell::RIGID);
        s.set_cell(Pos::new(2, 3), Cell::WOOD);
        let bomb = Bomb { pos: Pos::new(3, 3), fuse: 5, blast_radius: 3, owner: 0, moving: None };
        let cells = blast_cells(&s, &bomb);
        // right ray: nothing; up ray: just the wood
        assert!(!cells.iter().any(|p| p.row == 3 && p.col > 3));
        let up: Vec<_> = cells.iter().filter(|p| p.col == 3 && p.row < 3).collect();
        assert_eq!(up, vec![&Pos::new(2, 3)]);
        // left and down rays reach two cells each
        assert_eq!(cells.len(), 1 + 1 + 2 + 2);
    }

    #[test]
    fn blast_clipped_at_board_edge() {
        let s = open_board();
        let bomb = Bomb { pos: Pos::new(0, 0), fuse: 5, blast_radius: 3, owner: 0, moving: None };
        assert_eq!(blast_cells(&s, &bomb).len(), 5);
    }

    #[test]
    fn bomb_explodes_on_tenth_step_after_placement() {
        let mut s = open_board();
        s.advance([Action::Bomb, Action::Stop]).unwrap();
        assert_eq!(s.bombs().len(), 1);
        assert_eq!(s.agent(0).ammo, 0);
        // walk out of the blast: two cells down the column
        s.advance([Action::Down, Action::Stop]).unwrap();
        s.advance([Action::Down, Action::Stop]).unwrap();
        for k in 3..10 {
            let r = s.step(STOP).unwrap();
            assert!(r.explosions.is_empty(), "early explosion at step {k}");
            s = r.next_state;
        }
        let r = s.step(STOP).unwrap();
        assert_eq!(r.explosions.len(), 1);
        assert_eq!(r.next_state.flame_at(Pos::new(0, 0)), FLAME_LIFE);
        assert!(r.next_state.bombs().is_empty());
        assert_eq!(r.next_state.agent(0).ammo, 1);
        assert!(!r.terminal);
    }

    #[test]
    fn flames_last_two_steps() {
        let mut s = open_board();
        s.set_flame(Pos::new(4, 4), FLAME_LIFE);
        s.advance(STOP).unwrap();
        assert_eq!(s.flame_at(Pos::new(4, 4)), 1);
        s.advance(STOP).unwrap();
        assert_eq!(s.flame_at(Pos::new(4, 4)), 0);
    }

    #[test]
    fn chain_reaction_same_step() {
        // corridor: bomb A at (3,2) fuse 1, bomb B at (3,3) fuse 9
        let mut s = open_board();
        s.insert_bomb(Bomb { pos: Pos::new(3, 2), fuse: 1, blast_radius: 2, owner: 0, moving: None }).unwrap();
        s.insert_bomb(Bomb { pos: Pos::new(3, 3), fuse: 9, blast_radius: 2, owner: 1, moving: None }).unwrap();
        s.agent_mut(0).ammo = 0;
        s.agent_mut(1).ammo = 0;
        let r = s.step(STOP).unwrap();
        assert_eq!(r.explosions.len(), 2);
        assert!(r.next_state.bombs().is_empty());
        assert_eq!(r.next_state.flame_at(Pos::new(3, 4)), FLAME_LIFE);
        assert_eq!(r.next_state.agent(0).ammo, 1);
        assert_eq!(r.next_state.agent(1).ammo, 1);
    }

    #[test]
    fn agent_in_blast_dies_and_opponent_wins() {
        let mut s = GameState::empty(8, [Pos::new(3, 3), Pos::new(7, 7)]).unwrap();
        s.insert_bomb(Bomb { pos: Pos::new(3, 4), fuse: 1, blast_radius: 2, owner: 1, moving: None }).unwrap();
        let r = s.step(STOP).unwrap();
        assert!(r.terminal);
        assert_eq!(r.outcome, Some(Outcome::Win(1)));
        assert_eq!(r.rewards, [-1.0, 1.0]);
        assert_eq!(r.next_state.step(STOP).unwrap_err(), EnvError::Terminal);
    }

    #[test]
    fn both_dead_is_a_tie() {
        let mut s = GameState::empty(8, [Pos::new(3, 3), Pos::new(3, 5)]).unwrap();
        s.insert_bomb(Bomb { pos: Pos::new(3, 4), fuse: 1, blast_radius: 2, owner: 1, moving: None }).unwrap();
        let r = s.step(STOP).unwrap();
        assert_eq!(r.outcome, Some(Outcome::Tie));
        assert_eq!(r.rewards, [-1.0, -1.0]);
    }

    #[test]
    fn step_cap_is_a_tie() {
        let mut s = open_board();
        for t in 0..MAX_EPISODE_LEN_TEST {
            let info = s.advance(STOP).unwrap();
            assert_eq!(info.terminal, t + 1 == MAX_EPISODE_LEN_TEST);
            if !info.terminal {
                assert_eq!(info.rewards, [0.0, 0.0]);
            }
        }
        assert_eq!(s.outcome(), Some(Outcome::Tie));
        assert_eq!(s.timestep(), 800);
    }
    const MAX_EPISODE_LEN_TEST: u16 = super::super::MAX_EPISODE_LEN;

    #[test]
    fn same_target_both_bounce() {
        let mut s = GameState::empty(8, [Pos::new(3, 2), Pos::new(3, 4)]).unwrap();
        s.advance([Action::Right, Action::Left]).unwrap();
        assert_eq!(s.agent(0).pos, Pos::new(3, 2));
        assert_eq!(s.agent(1).pos, Pos::new(3, 4));
    }

    #[test]
    fn head_on_swap_bounces() {
        let mut s = GameState::empty(8, [Pos::new(3, 3), Pos::new(3, 4)]).unwrap();
        s.advance([Action::Right, Action::Left]).unwrap();
        assert_eq!(s.agent(0).pos, Pos::new(3, 3));
        assert_eq!(s.agent(1).pos, Pos::new(3, 4));
    }

    #[test]
    fn following_into_vacated_cell_is_allowed() {
        let mut s = GameState::empty(8, [Pos::new(3, 3), Pos::new(3, 4)]).unwrap();
        s.advance([Action::Right, Action::Right]).unwrap();
        assert_eq!(s.agent(0).pos, Pos::new(3, 4));
        assert_eq!(s.agent(1).pos, Pos::new(3, 5));
    }

    #[test]
    fn walking_into_a_standing_agent_bounces() {
        let mut s = GameState::empty(8, [Pos::new(3, 3), Pos::new(3, 4)]).unwrap();
        s.advance([Action::Right, Action::Stop]).unwrap();
        assert_eq!(s.agent(0).pos, Pos::new(3, 3));
    }

    #[test]
    fn illegal_moves_act_as_stop() {
        let mut s = open_board();
        s.set_cell(Pos::new(1, 0), Cell::WOOD);
        s.set_cell(Pos::new(0, 1), Cell::RIGID);
        let before = s.clone();
        s.advance([Action::Up, Action::Stop]).unwrap();
        s.advance([Action::Left, Action::Stop]).unwrap();
        s.advance([Action::Down, Action::Stop]).unwrap();
        s.advance([Action::Right, Action::Stop]).unwrap();
        assert_eq!(s.agent(0).pos, before.agent(0).pos);
    }

    #[test]
    fn bomb_without_ammo_or_on_bomb_is_stop() {
        let mut s = open_board();
        s.advance([Action::Bomb, Action::Stop]).unwrap();
        s.agent_mut(0).ammo = 1;
        s.advance([Action::Bomb, Action::Stop]).unwrap();
        assert_eq!(s.bombs().len(), 1);
        assert_eq!(s.agent(0).ammo, 1);
        s.agent_mut(0).ammo = 0;
        s.advance([Action::Down, Action::Stop]).unwrap();
        s.advance([Action::Bomb, Action::Stop]).unwrap();
        assert_eq!(s.bombs().len(), 1);
    }

    #[test]
    fn agents_cannot_walk_into_bombs_without_kick() {
        let mut s = GameState::empty(8, [Pos::new(3, 3), Pos::new(7, 7)]).unwrap();
        s.insert_bomb(Bomb { pos: Pos::new(3, 4), fuse: 9, blast_radius: 2, owner: 1, moving: None }).unwrap();
        s.advance([Action::Right, Action::Stop]).unwrap();
        assert_eq!(s.agent(0).pos, Pos::new(3, 3));
    }

    #[test]
    fn kick_sends_bomb_sliding() {
        let mut s = GameState::empty(8, [Pos::new(3, 1), Pos::new(7, 7)]).unwrap();
        s.agent_mut(0).can_kick = true;
        s.insert_bomb(Bomb { pos: Pos::new(3, 2), fuse: 9, blast_radius: 2, owner: 1, moving: None }).unwrap();
        s.advance([Action::Right, Action::Stop]).unwrap();
        assert_eq!(s.agent(0).pos, Pos::new(3, 2));
        assert_eq!(s.bombs()[0].pos, Pos::new(3, 3));
        assert_eq!(s.bombs()[0].moving, Some(Direction::Right));
        s.advance(STOP).unwrap();
        assert_eq!(s.bombs()[0].pos, Pos::new(3, 4));
        for _ in 0..5 {
            s.advance(STOP).unwrap();
        }
        // stops against the east wall
        assert_eq!(s.bombs()[0].pos, Pos::new(3, 7));
        assert_eq!(s.bombs()[0].moving, None);
    }

    #[test]
    fn powerups_are_collected() {
        let mut s = open_board();
        s.set_cell(Pos::new(0, 1), Cell { kind: CellKind::Passage, powerup: Some(PowerUp::Kick) });
        s.set_cell(Pos::new(0, 2), Cell { kind: CellKind::Passage, powerup: Some(PowerUp::ExtraBomb) });
        s.set_cell(Pos::new(0, 3), Cell { kind: CellKind::Passage, powerup: Some(PowerUp::BlastRadius) });
        for _ in 0..3 {
            s.advance([Action::Right, Action::Stop]).unwrap();
        }
        let a: AgentAttr = *s.agent(0);
        assert!(a.can_kick);
        assert_eq!(a.ammo, 2);
        assert_eq!(a.blast_radius, 3);
        assert!(s.cell(Pos::new(0, 2)).powerup.is_none());
    }

    #[test]
    fn wood_burns_and_reveals_powerup() {
        let mut s = open_board();
        s.set_cell(Pos::new(3, 4), Cell { kind: CellKind::Wood, powerup: Some(PowerUp::Kick) });
        s.insert_bomb(Bomb { pos: Pos::new(3, 3), fuse: 1, blast_radius: 3, owner: 0, moving: None }).unwrap();
        let r = s.step(STOP).unwrap();
        let c = r.next_state.cell(Pos::new(3, 4));
        assert_eq!(c.kind, CellKind::Passage);
        assert_eq!(c.powerup, Some(PowerUp::Kick));
        // the ray stopped on the wood
        assert_eq!(r.next_state.flame_at(Pos::new(3, 5)), 0);
    }

    #[test]
    fn walking_into_flame_kills() {
        let mut s = open_board();
        s.set_flame(Pos::new(0, 1), FLAME_LIFE);
        let r = s.step([Action::Right, Action::Stop]).unwrap();
        assert_eq!(r.outcome, Some(Outcome::Win(1)));
    }

    #[test]
    fn bad_action_index_is_rejected() {
        let s = open_board();
        assert_eq!(s.step_indices([6, 0]).unwrap_err(), EnvError::BadAction(6));
    }
}
