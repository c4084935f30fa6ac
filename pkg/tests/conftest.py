import json
import pathlib

import pytest

from pacexplain import Grammar, load_dataset, load_model

DATA_DIR = pathlib.Path(__file__).resolve().parent.parent / "src" / "pacexplain" / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA_DIR


@pytest.fixture(scope="session")
def zoo_tree():
    return load_model(str(DATA_DIR / "zoo_tree.json"))


@pytest.fixture(scope="session")
def zoo_grammar():
    with open(DATA_DIR / "zoo_grammar.json", "r", encoding="utf-8") as fh:
        return Grammar.from_json(json.load(fh))


@pytest.fixture(scope="session")
def zoo_data():
    return load_dataset(str(DATA_DIR / "zoo.csv"))


@pytest.fixture(scope="session")
def iris_mlp():
    return load_model(str(DATA_DIR / "mlp_iris.json"))


@pytest.fixture(scope="session")
def adult_mlp():
    return load_model(str(DATA_DIR / "mlp_adult.json"))
