use muxer::Mux;
use simnet::{Ctx, Delivery, Params, ProcessId, StepIndex};

use crate::{is_bit, value, Agreement, BinaryAgreement, DolevStrong, Protocol, Value};

/// Binary agreement from N parallel broadcasts, one per process as leader.
///
/// Each broadcast runs under instance id = leader index. The decision is the
/// majority of the N outcomes, counting anything but `1` as `0`; ties go to 0.
#[derive(Debug, Clone)]
pub struct MajorityBa {
    params: Params,
    instances: Mux<DolevStrong>,
    decision: Option<Value>,
}

impl MajorityBa {
    pub fn outcomes(&self) -> Vec<Option<&Value>> {
        self.instances.iter().map(|(_, ds)| ds.output()).collect()
    }
}

impl BinaryAgreement for MajorityBa {
    fn start(params: Params, me: ProcessId, input: bool) -> Self {
        assert!(2 * params.f < params.n, "majority agreement needs 2f < N");
        let mut instances = Mux::new();
        for leader in params.processes() {
            let initial = (leader == me).then(|| value(input as u64));
            instances.insert(leader.0 as u64, DolevStrong::new(params, me, leader, initial));
        }
        MajorityBa { params, instances, decision: None }
    }
}

impl Agreement for MajorityBa {
    fn start(params: Params, me: ProcessId, input: Value) -> Self {
        <Self as BinaryAgreement>::start(params, me, is_bit(&input, true))
    }
}

impl Protocol for MajorityBa {
    fn on_step(&mut self, local: StepIndex, inbox: &[Delivery], ctx: &mut Ctx<'_>) {
        if self.decision.is_some() {
            return;
        }
        self.instances.service(inbox, ctx, local == 0, |_| None, |_, ds, mail, ctx| ds.on_step(local, mail, ctx));
        if local >= self.duration() {
            let mut ones = 0;
            for (_, ds) in self.instances.iter_mut() {
                ds.finalize();
                if ds.output().is_some_and(|v| is_bit(v, true)) {
                    ones += 1;
                }
            }
            self.decision = Some(value((2 * ones > self.params.n) as u64));
        }
    }

    fn output(&self) -> Option<&Value> {
        self.decision.as_ref()
    }

    fn duration(&self) -> StepIndex {
        self.params.f as StepIndex + 2
    }
}
