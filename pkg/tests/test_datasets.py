import numpy as np
import pytest

from multiscale_embed.datasets import (
    find_citation_dataset,
    karate_club,
    karate_edge_lines,
    karate_label_lines,
    load_citation_dataset,
)
from multiscale_embed.graph import load_edge_list


class TestKarateFixture:
    def test_shape(self):
        graph, labels = karate_club()
        assert graph.node_count == 34
        assert graph.edge_count == 78
        assert labels.class_count == 2
        assert labels.size == 34

    def test_factions_are_balanced_enough(self):
        _, labels = karate_club()
        counts = np.bincount(labels.classes)
        assert counts.tolist() == [17, 17]

    def test_edge_lines_round_trip(self):
        graph, _ = karate_club()
        parsed = load_edge_list(karate_edge_lines().encode())
        assert parsed.node_count == graph.node_count
        assert parsed.edge_count == graph.edge_count

    def test_label_lines_cover_every_node(self):
        lines = karate_label_lines().strip().split("\n")
        assert len(lines) == 34


class TestCitationLoader:
    def write_converted(self, directory):
        (directory / "cora.edges").write_text("p1 p2\np2 p3\n")
        (directory / "cora.labels").write_text("p1\tml\np2\tdb\np3\tml\n")

    def write_raw(self, directory):
        (directory / "cora.content").write_text(
            "p1\t0\t1\tml\np2\t1\t0\tdb\np3\t0\t0\tml\np4\t1\t1\tml\n"
        )
        (directory / "cora.cites").write_text("p1\tp2\np2\tp3\n")

    def test_converted_layout(self, tmp_path):
        self.write_converted(tmp_path)
        graph, labels = load_citation_dataset(tmp_path, "cora")
        assert graph.node_count == 3
        assert labels.class_names == ("ml", "db")

    def test_raw_layout_keeps_isolated_papers(self, tmp_path):
        self.write_raw(tmp_path)
        graph, labels = load_citation_dataset(tmp_path, "cora")
        assert graph.node_count == 4  # p4 has no citations
        assert graph.degrees()[graph.index_of("p4")] == 0
        assert labels.size == 4

    def test_missing_files_raise(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_citation_dataset(tmp_path, "cora")

    def test_find_via_environment(self, tmp_path, monkeypatch):
        nested = tmp_path / "cora"
        nested.mkdir()
        self.write_converted(nested)
        monkeypatch.setenv("MULTISCALE_EMBED_DATA", str(tmp_path))
        assert find_citation_dataset("cora") == nested

    def test_find_returns_none_when_absent(self, tmp_path, monkeypatch):
        monkeypatch.delenv("MULTISCALE_EMBED_DATA", raising=False)
        monkeypatch.chdir(tmp_path)
        assert find_citation_dataset("cora", start=tmp_path) is None


from conftest import requires_cora  # noqa: E402


@requires_cora
def test_cora_has_expected_shape(cora):
    graph, labels = cora
    assert graph.node_count == 2708
    assert labels.class_count == 7
