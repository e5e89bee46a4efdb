import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))  # make oracles importable

from graphscm.hetgraph import Relation, Schema, load_graph

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


@pytest.fixture(scope="session")
def toy_dir():
    return os.path.join(FIXTURES, "toy_academic")


@pytest.fixture()
def toy_graph(toy_dir):
    return load_graph(toy_dir)


@pytest.fixture(scope="session")
def dblp_schema():
    return Schema(
        node_types=["author", "paper", "venue", "term"],
        relations=[
            Relation("write", "author", "paper", "rev_write"),
            Relation("rev_write", "paper", "author", "write"),
            Relation("publish", "venue", "paper", "rev_publish"),
            Relation("rev_publish", "paper", "venue", "publish"),
            Relation("use", "paper", "term", "rev_use"),
            Relation("rev_use", "term", "paper", "use"),
        ],
        target_type="author",
        num_classes=4,
    )


@pytest.fixture(scope="session")
def acm_schema():
    return Schema(
        node_types=["paper", "author", "subject"],
        relations=[
            Relation("cite", "paper", "paper", "ref"),
            Relation("ref", "paper", "paper", "cite"),
            Relation("write", "author", "paper", "rev_write"),
            Relation("rev_write", "paper", "author", "write"),
            Relation("belong", "paper", "subject", "rev_belong"),
            Relation("rev_belong", "subject", "paper", "belong"),
        ],
        target_type="paper",
        num_classes=3,
    )
