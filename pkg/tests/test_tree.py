"""Capability tree: construction, special cases, insertion, validation."""

from __future__ import annotations

import pytest

from skillos.errors import CategorizerFailure, DuplicateSkill, GatewayError
from skillos.gateway import ChatResult, ScriptedGateway
from skillos.scripted import default_fallbacks
from skillos.tree import (
    CapabilityTree,
    CategoryNode,
    Group,
    GroupProposal,
    ROOT_GROUPS,
    TreeConfig,
    assign_skills,
    build_tree,
    derived_capacity,
    discover_groups,
    insert_skill,
    resolve_special_cases,
    validate_tree,
)

from .conftest import make_corpus, make_skill


def fallback_gateway(**overrides) -> ScriptedGateway:
    fallbacks = default_fallbacks()
    fallbacks.update(overrides)
    return ScriptedGateway(fallbacks=fallbacks)


def plain_refresh(payload):
    if payload.get("mode") == "refresh":
        group = payload["group"]
        return {"groups": [{"name": group["name"], "description": group["description"] + " *"}]}
    return default_fallbacks()["group_discovery"](payload)


class TestConfig:
    def test_capacity_derivation(self):
        assert derived_capacity(7) == 10
        assert derived_capacity(12) == 18
        assert TreeConfig.from_branching(7).c == 10
        assert TreeConfig.from_branching(12).c == 18

    def test_branching_floor(self):
        with pytest.raises(ValueError):
            TreeConfig(b=3, c=4)


class TestBuildHandTrace:
    """Root assignment of 12 skills into sizes {4,3,3,1,1}."""

    def _gateway(self) -> ScriptedGateway:
        def assignment(payload):
            ids = sorted(s["id"] for s in payload["skills"])
            sizes = [4, 3, 3, 1, 1]
            mapping = {}
            cursor = 0
            for group_index, size in enumerate(sizes):
                for skill_id in ids[cursor : cursor + size]:
                    mapping[skill_id] = group_index
                cursor += size
            return {"assignments": mapping}

        def merge_target(payload):
            return {"choice": 0}

        return fallback_gateway(
            skill_assignment=assignment,
            category_descent=merge_target,
            group_discovery=plain_refresh,
        )

    def test_singletons_merged_then_small_groups_leafified(self, corpus12):
        tree = build_tree(corpus12, TreeConfig.from_branching(7), self._gateway())
        assert validate_tree(tree) == []
        root = tree.nodes[tree.root]
        categories = [tree.nodes[c] for c in root.children]
        assert len(categories) == 3
        assert sorted(len(c.skill_ids) for c in categories) == [3, 3, 6]
        assert len(tree.leaves()) == 12
        # every category's children are leaves (all groups were below capacity)
        for category in categories:
            assert all(tree.nodes[c].kind == "leaf" for c in category.children)
        # merged group got a refreshed description
        merged = max(categories, key=lambda c: len(c.skill_ids))
        assert merged.description.endswith("*")


class TestBuildSmallCorpus:
    def test_two_skills_leafified_directly_under_root(self, scripted_gateway):
        corpus = make_corpus(2)
        tree = build_tree(corpus, TreeConfig.from_branching(7), scripted_gateway)
        root = tree.nodes[tree.root]
        assert len(root.children) == 2
        assert all(tree.nodes[c].kind == "leaf" for c in root.children)
        assert validate_tree(tree) == []

    def test_single_skill(self, scripted_gateway):
        corpus = make_corpus(1)
        tree = build_tree(corpus, TreeConfig.from_branching(7), scripted_gateway)
        assert len(tree.leaves()) == 1
        assert validate_tree(tree) == []


class TestBuildInvariants:
    @pytest.mark.parametrize("count,b", [(12, 7), (60, 7), (60, 12)])
    def test_validate_clean_on_fixture_corpora(self, count, b, scripted_gateway):
        corpus = make_corpus(count)
        tree = build_tree(corpus, TreeConfig.from_branching(b), scripted_gateway)
        assert validate_tree(tree) == []
        assert len(tree.leaves()) == count
        assert set(tree.nodes[tree.root].skill_ids) == set(corpus)

    def test_byte_deterministic(self, corpus60):
        config = TreeConfig.from_branching(7)
        first = build_tree(corpus60, config, fallback_gateway())
        second = build_tree(corpus60, config, fallback_gateway())
        assert first.to_json() == second.to_json()

    def test_root_uses_fixed_groups(self, corpus60, scripted_gateway):
        tree = build_tree(corpus60, TreeConfig.from_branching(7), scripted_gateway)
        root_names = {tree.nodes[c].name for c in tree.nodes[tree.root].children}
        fixed = {name for name, _ in ROOT_GROUPS}
        assert root_names <= fixed

    def test_gateway_error_aborts_build(self, corpus60):
        def broken(payload):
            return ChatResult("error", error_kind="transport").unwrap()

        gateway = fallback_gateway(skill_assignment=broken)
        with pytest.raises(CategorizerFailure):
            build_tree(corpus60, TreeConfig.from_branching(7), gateway)

    def test_degenerate_assignment_leafifies_wholesale(self, corpus12):
        gateway = fallback_gateway(
            skill_assignment=lambda payload: {
                "assignments": {s["id"]: 0 for s in payload["skills"]}
            },
            group_discovery=plain_refresh,
        )
        tree = build_tree(corpus12, TreeConfig.from_branching(7), gateway)
        root = tree.nodes[tree.root]
        assert all(tree.nodes[c].kind == "leaf" for c in root.children)
        assert len(root.children) == 12
        assert validate_tree(tree) == []


def _node_with(corpus, name="workbench") -> CategoryNode:
    return CategoryNode(
        node_id="n0099", name=name, description="unit fixture", skill_ids=set(corpus)
    )


class TestDiscoverGroups:
    def test_root_fixed_five_in_order(self, corpus12, scripted_gateway):
        node = _node_with(corpus12)
        proposal = discover_groups(
            node, corpus12, TreeConfig.from_branching(7), scripted_gateway, is_root=True
        )
        assert [g.name for g in proposal.groups] == [name for name, _ in ROOT_GROUPS]

    def test_in_range_proposal_accepted(self, corpus12):
        gateway = fallback_gateway(
            group_discovery=lambda payload: {
                "groups": [{"name": f"g{i}", "description": "d"} for i in range(5)]
            }
        )
        node = _node_with(corpus12)
        proposal = discover_groups(node, corpus12, TreeConfig.from_branching(7), gateway)
        assert len(proposal.groups) == 5  # 4 <= 5 <= 9 for B=7

    def test_persistent_oversize_merged_down_to_range(self, corpus12):
        calls = []

        def eleven(payload):
            calls.append(payload["attempt"])
            return {"groups": [{"name": f"g{i}", "description": f"d{i}"} for i in range(11)]}

        node = _node_with(corpus12)
        proposal = discover_groups(
            node, corpus12, TreeConfig.from_branching(7), fallback_gateway(group_discovery=eleven)
        )
        assert calls == [1, 2]  # retry happened with attempt feedback
        assert len(proposal.groups) == 9  # clamped to B+2

    def test_retry_can_recover(self, corpus12):
        def flaky(payload):
            count = 11 if payload["attempt"] == 1 else 6
            return {"groups": [{"name": f"g{i}", "description": "d"} for i in range(count)]}

        node = _node_with(corpus12)
        proposal = discover_groups(
            node, corpus12, TreeConfig.from_branching(7), fallback_gateway(group_discovery=flaky)
        )
        assert len(proposal.groups) == 6

    def test_undersize_repaired_by_split_call(self, corpus12):
        def sparse(payload):
            if payload.get("mode") == "split":
                return {"groups": [{"name": f"s{i}", "description": "d"} for i in range(4)]}
            return {"groups": [{"name": "only", "description": "d"}, {"name": "two", "description": "d"}]}

        node = _node_with(corpus12)
        proposal = discover_groups(
            node, corpus12, TreeConfig.from_branching(7), fallback_gateway(group_discovery=sparse)
        )
        assert 4 <= len(proposal.groups) <= 9


class TestAssignSkills:
    def _proposal(self):
        return GroupProposal([Group("left", "l"), Group("right", "r")])

    def test_total_assignment(self, scripted_gateway):
        corpus = make_corpus(6)
        gateway = fallback_gateway(
            skill_assignment=lambda payload: {
                "assignments": {s["id"]: i % 2 for i, s in enumerate(payload["skills"])}
            }
        )
        node = _node_with(corpus)
        assignment = assign_skills(node, self._proposal(), corpus, gateway)
        assert len(assignment) == 6

    def test_out_of_range_index_left_unassigned(self):
        corpus = make_corpus(6)
        ids = sorted(corpus)
        gateway = fallback_gateway(
            skill_assignment=lambda payload: {
                "assignments": {ids[0]: 99, **{sid: 0 for sid in ids[1:]}}
            }
        )
        assignment = assign_skills(_node_with(corpus), self._proposal(), corpus, gateway)
        assert ids[0] not in assignment
        assert len(assignment) == 5

    def test_omitted_skill_left_unassigned(self):
        corpus = make_corpus(6)
        ids = sorted(corpus)
        gateway = fallback_gateway(
            skill_assignment=lambda payload: {"assignments": {sid: 1 for sid in ids[1:]}}
        )
        assignment = assign_skills(_node_with(corpus), self._proposal(), corpus, gateway)
        assert len(assignment) == 5


class TestResolveSpecialCases:
    def test_singleton_merged_and_description_refreshed(self):
        corpus = make_corpus(6)
        ids = sorted(corpus)
        proposal = GroupProposal([Group("bulk", "most skills"), Group("lone", "one skill")])
        assignment = {sid: 0 for sid in ids[:5]} | {ids[5]: 1}
        gateway = fallback_gateway(
            category_descent=lambda payload: {"choice": 0},
            group_discovery=plain_refresh,
        )
        populated = resolve_special_cases(_node_with(corpus), proposal, assignment, gateway, corpus)
        assert len(populated) == 1
        group, members = populated[0]
        assert len(members) == 6
        assert group.description.endswith("*")

    def test_two_small_groups_survive(self):
        corpus = make_corpus(7)
        ids = sorted(corpus)
        proposal = GroupProposal([Group("a", "x"), Group("b", "y")])
        assignment = {sid: 0 for sid in ids[:3]} | {sid: 1 for sid in ids[3:]}
        populated = resolve_special_cases(
            _node_with(corpus), proposal, assignment, fallback_gateway(), corpus
        )
        assert [len(m) for _, m in populated] == [3, 4]

    def test_persistent_orphan_joins_largest_group(self):
        corpus = make_corpus(10)
        ids = sorted(corpus)
        proposal = GroupProposal([Group("big", "x"), Group("small", "y")])
        assignment = {sid: 0 for sid in ids[:6]} | {sid: 1 for sid in ids[6:9]}
        # the re-assignment pass also returns nothing for the orphan
        gateway = fallback_gateway(skill_assignment=lambda payload: {"assignments": {}})
        populated = resolve_special_cases(_node_with(corpus), proposal, assignment, gateway, corpus)
        sizes = {group.name: len(members) for group, members in populated}
        assert sizes == {"big": 7, "small": 3}

    def test_reassignment_pass_rescues_orphans(self):
        corpus = make_corpus(10)
        ids = sorted(corpus)
        proposal = GroupProposal([Group("big", "x"), Group("small", "y")])
        assignment = {sid: 0 for sid in ids[:6]} | {sid: 1 for sid in ids[6:9]}

        def second_pass(payload):
            assert payload["attempt"] == 2
            return {"assignments": {s["id"]: 1 for s in payload["skills"]}}

        gateway = fallback_gateway(skill_assignment=second_pass)
        populated = resolve_special_cases(_node_with(corpus), proposal, assignment, gateway, corpus)
        sizes = {group.name: len(members) for group, members in populated}
        assert sizes == {"big": 6, "small": 4}

    def test_merge_target_cosine_fallback_on_gateway_error(self):
        # descent call fails; the lone video skill still lands in the group
        # whose text it is most similar to, chosen by embedding cosine
        corpus = make_corpus(12)
        ids = sorted(corpus)
        lone = next(sid for sid in ids if sid.startswith("video"))
        rest = [sid for sid in ids if sid != lone]
        proposal = GroupProposal(
            [
                Group("chart tools", "statistical plotting over tabular numbers"),
                Group("clip editing", "video clips, timeline transitions, rendering"),
                Group("lonely", "temporary"),
            ]
        )
        assignment = (
            {sid: 0 for sid in rest[:6]} | {sid: 1 for sid in rest[6:]} | {lone: 2}
        )

        def failing_descent(payload):
            raise GatewayError("transport", "scripted outage")

        gateway = fallback_gateway(
            category_descent=failing_descent, group_discovery=plain_refresh
        )
        populated = resolve_special_cases(_node_with(corpus), proposal, assignment, gateway, corpus)
        by_name = {group.name.split(" ")[0]: members for group, members in populated}
        assert lone in by_name["clip"]
        assert lone not in by_name["chart"]

    def test_no_singleton_groups_remain(self):
        corpus = make_corpus(9)
        ids = sorted(corpus)
        proposal = GroupProposal([Group("a", "x"), Group("b", "y"), Group("c", "z")])
        assignment = {ids[0]: 0} | {sid: 1 for sid in ids[1:5]} | {sid: 2 for sid in ids[5:]}
        gateway = fallback_gateway(
            category_descent=lambda payload: {"choice": 0}, group_discovery=plain_refresh
        )
        populated = resolve_special_cases(_node_with(corpus), proposal, assignment, gateway, corpus)
        assert all(len(members) >= 2 for _, members in populated)


class TestInsertSkill:
    def _built(self, corpus):
        return build_tree(corpus, TreeConfig.from_branching(7), fallback_gateway())

    def test_insert_grows_ancestors_and_appends_leaf(self, corpus60):
        tree = self._built(corpus60)
        newcomer = make_skill("video", 99, install_count=1)
        before_leaves = len(tree.leaves())
        updated, path = insert_skill(tree, newcomer, fallback_gateway())
        assert len(updated.leaves()) == before_leaves + 1
        assert validate_tree(updated) == []
        assert path[0] == updated.root
        for node_id in path:
            assert newcomer.id in updated.nodes[node_id].skill_ids
        # original tree untouched
        assert newcomer.id not in tree.nodes[tree.root].skill_ids

    def test_duplicate_insert_rejected(self, corpus60):
        tree = self._built(corpus60)
        existing = corpus60[sorted(corpus60)[0]]
        with pytest.raises(DuplicateSkill):
            insert_skill(tree, existing, fallback_gateway())

    def test_path_descriptions_refreshed_bottom_up(self, corpus60):
        tree = self._built(corpus60)
        newcomer = make_skill("chart", 77, install_count=3)
        gateway = fallback_gateway(group_discovery=plain_refresh)
        updated, path = insert_skill(tree, newcomer, gateway)
        for node_id in path:
            if node_id == updated.root:
                continue
            assert updated.nodes[node_id].description.endswith("*")
        # root is never refreshed
        assert updated.nodes[updated.root].description == tree.nodes[tree.root].description

    def test_twenty_sequential_inserts(self, corpus60):
        tree = self._built(corpus60)
        gateway = fallback_gateway()
        for serial in range(20):
            topic = ["video", "chart", "legal", "audio"][serial % 4]
            newcomer = make_skill(topic, 200 + serial, install_count=1)
            leaves_before = len(tree.leaves())
            tree, _ = insert_skill(tree, newcomer, gateway)
            assert validate_tree(tree) == []
            assert len(tree.leaves()) == leaves_before + 1


class TestPromotionWiring:
    def test_promote_event_drives_tree_insert(self, corpus60, scripted_gateway):
        """Promoting a dormant skill triggers the tree update listener."""
        from .conftest import registry_for

        active = dict(list(sorted(corpus60.items()))[:59])
        dormant_id = sorted(corpus60)[59]
        registry = registry_for(corpus60)
        trees = [build_tree(active, TreeConfig.from_branching(7), scripted_gateway)]

        def on_update(skill):
            updated, _ = insert_skill(trees[-1], skill, scripted_gateway)
            trees.append(updated)

        registry.on_tree_update(on_update)
        assert dormant_id not in trees[-1].nodes[trees[-1].root].skill_ids
        registry.promote_skill(dormant_id)
        assert dormant_id in trees[-1].nodes[trees[-1].root].skill_ids
        assert validate_tree(trees[-1]) == []
        assert len(trees[-1].leaves()) == 60


class TestValidateTree:
    def _valid(self, corpus12, scripted_gateway) -> CapabilityTree:
        return build_tree(corpus12, TreeConfig.from_branching(7), scripted_gateway)

    def test_fresh_tree_clean(self, corpus12, scripted_gateway):
        assert validate_tree(self._valid(corpus12, scripted_gateway)) == []

    def test_duplicate_skill_across_leaves_flagged(self, corpus12, scripted_gateway):
        tree = self._valid(corpus12, scripted_gateway)
        leaves = tree.leaves()
        # copy one leaf's skill into another leaf
        target, victim = leaves[0], leaves[1]
        victim.skill_ids = set(target.skill_ids)
        report = validate_tree(tree)
        assert any("overlap" in line or "multiple leaves" in line for line in report)

    def test_partition_violation_flagged(self, corpus12, scripted_gateway):
        tree = self._valid(corpus12, scripted_gateway)
        tree.nodes[tree.root].skill_ids.add("ghost-skill")
        report = validate_tree(tree)
        assert any("partition law" in line or "coverage" in line for line in report)

    def test_singleton_category_flagged(self):
        skill = make_skill("video", 1, 5)
        root = CategoryNode("n0000", "root", "", children=["n0001"], skill_ids={skill.id})
        lone = CategoryNode("n0001", "lonely", "", children=["n0002"], skill_ids={skill.id})
        leaf = CategoryNode(
            "n0002", skill.name, skill.description, skill_ids={skill.id}, kind="leaf"
        )
        tree = CapabilityTree(
            root="n0000",
            nodes={"n0000": root, "n0001": lone, "n0002": leaf},
            config=TreeConfig.from_branching(7),
        )
        report = validate_tree(tree)
        assert any("singleton group" in line for line in report)


class TestSerialization:
    def test_roundtrip(self, corpus12, scripted_gateway, tmp_path):
        tree = build_tree(corpus12, TreeConfig.from_branching(7), scripted_gateway)
        path = tmp_path / "tree.json"
        tree.save(path)
        loaded = CapabilityTree.load(path)
        assert loaded.to_json() == tree.to_json()
        assert validate_tree(loaded) == []
