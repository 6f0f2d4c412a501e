"""Core domain types: resource vectors, identities, authorization."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fedplane.errors import (
    InvalidTransitionError,
    NotFoundError,
    ValidationError,
)
from fedplane.model import (
    AuthDecision,
    Booking,
    BookingStatus,
    Cluster,
    Project,
    ResourceVector,
    Verdict,
    WorkspacePod,
    authorize,
    validate_resource_vector,
)

vectors = st.builds(
    ResourceVector,
    gpus=st.integers(min_value=0, max_value=16),
    cpu_cores=st.integers(min_value=0, max_value=128),
    memory_gib=st.integers(min_value=0, max_value=512),
)


def make_project(pid="p-0001", name="demo", members=("u1",), request=None):
    return Project(
        id=pid,
        name=name,
        members=frozenset(members),
        request=request or ResourceVector(1, 8, 32),
    )


class TestResourceVector:
    def test_kuh_server_shape_is_valid(self):
        # 64 cores / 388 GiB / 2 GPUs: the reference single-server cluster.
        assert validate_resource_vector(2, 64, 388) == []

    def test_zero_vector_is_valid(self):
        assert validate_resource_vector(0, 0, 0) == []
        ResourceVector()  # does not raise

    def test_negative_components_are_unrepresentable(self):
        violations = validate_resource_vector(-1, 4, -2)
        assert violations == ["gpus must be >= 0", "memory_gib must be >= 0"]
        with pytest.raises(ValidationError):
            ResourceVector(gpus=-1)

    def test_non_integer_components_rejected(self):
        assert validate_resource_vector(1.5, 4, 8) == ["gpus must be an integer"]
        assert validate_resource_vector(True, 4, 8) == ["gpus must be an integer"]

    def test_componentwise_partial_order(self):
        assert ResourceVector(1, 8, 32) <= ResourceVector(2, 64, 388)
        assert not ResourceVector(3, 8, 32) <= ResourceVector(2, 64, 388)

    def test_incomparable_pair(self):
        a = ResourceVector(2, 1, 1)
        b = ResourceVector(1, 2, 2)
        assert not a <= b and not b <= a

    def test_arithmetic(self):
        total = ResourceVector(2, 64, 388)
        used = ResourceVector(2, 16, 64)
        assert total - used == ResourceVector(0, 48, 324)
        assert used + ResourceVector(0, 48, 324) == total
        with pytest.raises(ValidationError):
            used - total
        assert used.saturating_sub(total) == ResourceVector()

    def test_from_dict_accepts_short_aliases(self):
        assert ResourceVector.from_dict({"gpus": 1, "cpu": 8, "mem": 32}) == ResourceVector(1, 8, 32)
        with pytest.raises(ValidationError):
            ResourceVector.from_dict({"gpus": 1, "disk": 10})
        with pytest.raises(ValidationError):
            ResourceVector.from_dict({"gpus": "two"})

    @given(vectors)
    def test_order_reflexive(self, v):
        assert v <= v

    @given(vectors, vectors)
    def test_order_antisymmetric(self, a, b):
        if a <= b and b <= a:
            assert a == b

    @given(vectors, vectors, vectors)
    def test_order_transitive(self, a, b, c):
        if a <= b and b <= c:
            assert a <= c


class TestIdentifiers:
    def test_empty_ids_rejected(self):
        with pytest.raises(ValidationError):
            make_project(pid="")

    def test_long_ids_rejected(self):
        with pytest.raises(ValidationError):
            make_project(pid="x" * 64)

    def test_project_requires_members(self):
        with pytest.raises(ValidationError):
            make_project(members=())


class TestCluster:
    def test_bookable_bounded_by_capacity(self):
        with pytest.raises(ValidationError):
            Cluster(id="a", display_name="a", capacity=ResourceVector(2, 8, 32), bookable_gpus=3)
        Cluster(id="a", display_name="a", capacity=ResourceVector(2, 8, 32), bookable_gpus=2)

    def test_availability_is_pure_function_of_heartbeat_and_policy(self):
        from fedplane.model import Availability, AvailabilityPolicy

        policy = AvailabilityPolicy(interval=10, miss_threshold=3)
        cluster = Cluster(id="a", display_name="a", capacity=ResourceVector(1, 1, 1), bookable_gpus=1)
        assert cluster.availability(0, policy) == Availability.UNAVAILABLE
        cluster.last_heartbeat = 100
        assert cluster.availability(130, policy) == Availability.AVAILABLE
        assert cluster.availability(131, policy) == Availability.UNAVAILABLE


class TestBookingLifecycle:
    def make(self):
        return Booking(
            id="b-0001", user="u1", project="p-0001", cluster="c1",
            gpu_count=1, start=0, end=10,
        )

    def test_interval_must_be_forward(self):
        with pytest.raises(ValidationError):
            Booking(id="b", user="u", project="p", cluster="c", gpu_count=1, start=10, end=10)

    def test_gpu_count_positive(self):
        with pytest.raises(ValidationError):
            Booking(id="b", user="u", project="p", cluster="c", gpu_count=0, start=0, end=10)

    @pytest.mark.parametrize(
        "path",
        [
            (BookingStatus.ACTIVE, BookingStatus.EXPIRED),
            (BookingStatus.ACTIVE, BookingStatus.CANCELLED),
            (BookingStatus.CANCELLED,),
            (BookingStatus.EXPIRED,),
        ],
    )
    def test_legal_paths(self, path):
        booking = self.make()
        for status in path:
            booking.transition(status)
        assert booking.status == path[-1]

    @pytest.mark.parametrize(
        "path",
        [
            (BookingStatus.EXPIRED, BookingStatus.ACTIVE),
            (BookingStatus.CANCELLED, BookingStatus.EXPIRED),
            (BookingStatus.ACTIVE, BookingStatus.ACTIVE),
            (BookingStatus.EXPIRED, BookingStatus.CANCELLED),
        ],
    )
    def test_illegal_paths(self, path):
        booking = self.make()
        with pytest.raises(InvalidTransitionError):
            for status in path:
                booking.transition(status)

    def test_half_open_coverage(self):
        booking = self.make()
        assert booking.covers(0)
        assert booking.covers(9)
        assert not booking.covers(10)


class TestWorkspacePod:
    def test_respawned_pod_cannot_hold_grant(self):
        from fedplane.model import GpuGrant, PodPhase

        with pytest.raises(ValidationError):
            WorkspacePod(
                id="pod-1", user="u", project="p", cluster="c",
                gpu_grant=GpuGrant(booking="b", gpus=1), phase=PodPhase.RESPAWNED,
            )


class TestAuthorize:
    def setup_method(self):
        self.registry = {
            "p1": make_project("p1", "one", members=("u1", "u3")),
            "p2": make_project("p2", "two", members=("u3",)),
        }

    def test_member_is_allowed(self):
        assert authorize("u1", "p1", "spawn-workspace", self.registry).allowed

    def test_non_member_is_denied_with_reason(self):
        decision = authorize("u2", "p1", "read-data", self.registry)
        assert decision.verdict == Verdict.DENY
        assert decision.reason == "not a member"

    def test_unknown_project_is_not_found_not_deny(self):
        with pytest.raises(NotFoundError):
            authorize("u1", "nope", "view-project", self.registry)

    def test_deny_requires_reason(self):
        with pytest.raises(ValidationError):
            AuthDecision(Verdict.DENY, "")

    def test_multi_project_member_allowed_on_each(self):
        assert authorize("u3", "p1", "book", self.registry).allowed
        assert authorize("u3", "p2", "book", self.registry).allowed

    def test_verdict_identical_across_all_gateway_actions(self):
        # Equal privileges: the action name never changes the verdict.
        from fedplane.gateway.auth import PROJECT_ACTIONS

        for user in ("u1", "u2", "u3"):
            verdicts = {
                authorize(user, "p1", action, self.registry).verdict
                for action in PROJECT_ACTIONS
            }
            assert len(verdicts) == 1

    @given(st.text(min_size=1, max_size=30))
    def test_verdict_independent_of_arbitrary_action_names(self, action):
        allowed = authorize("u1", "p1", action, self.registry)
        denied = authorize("u2", "p1", action, self.registry)
        assert allowed.allowed and not denied.allowed
