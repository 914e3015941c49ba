import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qe_bias.corpus import (
    AMBIGUOUS_FM,
    AMBIGUOUS_NEUTRAL,
    UNAMBIGUOUS_INTRA,
    EvaluationInstance,
    LanguagePair,
    instance_to_record,
    load_dataset,
    minimal_edit_diagnostics,
    save_native,
    validate_minimal_edit,
)
from qe_bias.errors import DatasetError
from qe_bias.tokenizer import tokenize

from synthdata import ambiguous_instances, unambiguous_instances


class TestTokenizer:
    def test_whitespace_split(self):
        assert tokenize("el profesor") == ["el", "profesor"]

    def test_punctuation_isolated(self):
        assert tokenize("ciao, mondo!") == ["ciao", ",", "mondo", "!"]

    def test_no_lowercasing(self):
        assert tokenize("La Casa") == ["La", "Casa"]

    def test_fold_case(self):
        assert tokenize("La Casa", fold_case=True) == ["la", "casa"]

    def test_unicode(self):
        assert tokenize("«l'académicienne»") == ["«", "l", "'", "académicienne", "»"]


class TestValidateMinimalEdit:
    def test_full_substitution(self):
        diff = validate_minimal_edit("el profesor", "la profesora")
        assert diff.substitutions == 2
        assert diff.insertions == 0
        assert diff.deletions == 0
        assert diff.diff_ratio == 1.0
        assert diff.changed_tokens == (("el", "la"), ("profesor", "profesora"))

    def test_identity(self):
        diff = validate_minimal_edit("same text", "same text")
        assert (diff.substitutions, diff.insertions, diff.deletions) == (0, 0, 0)
        assert diff.diff_ratio == 0.0

    def test_single_substitution(self):
        diff = validate_minimal_edit("a b c d", "a x c d")
        assert diff.substitutions == 1
        assert diff.diff_ratio == 0.25

    def test_insertion_deletion(self):
        diff = validate_minimal_edit("a b", "a b c")
        assert diff.insertions == 1
        assert diff.deletions == 0
        back = validate_minimal_edit("a b c", "a b")
        assert back.deletions == 1
        assert back.insertions == 0

    @given(
        st.lists(st.sampled_from("abcxyz"), max_size=8),
        st.lists(st.sampled_from("abcxyz"), max_size=8),
    )
    @settings(max_examples=200)
    def test_count_symmetry(self, xs, ys):
        a, b = " ".join(xs), " ".join(ys)
        fwd = validate_minimal_edit(a, b)
        rev = validate_minimal_edit(b, a)
        assert fwd.substitutions == rev.substitutions
        assert fwd.insertions == rev.deletions
        assert fwd.deletions == rev.insertions
        assert fwd.diff_ratio == rev.diff_ratio
        assert 0.0 <= fwd.diff_ratio <= 1.0


class TestNativeFormat:
    def test_round_trip(self, tmp_path):
        instances = ambiguous_instances(5) + unambiguous_instances(3, 3)
        path = tmp_path / "data.jsonl"
        save_native(instances, path)
        assert load_dataset(path, "native") == instances

    def test_metadata_round_trip(self, tmp_path):
        inst = EvaluationInstance(
            id="x1",
            language_pair=LanguagePair("en", "it"),
            source="an academic works",
            condition=AMBIGUOUS_FM,
            variants={"F": "una accademica", "M": "uno accademico"},
            metadata={"origin": "fixture"},
        )
        path = tmp_path / "data.jsonl"
        save_native([inst], path)
        assert load_dataset(path, "native") == [inst]

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert load_dataset(path, "native") == []

    def test_order_preserved(self, tmp_path):
        instances = ambiguous_instances(10)
        path = tmp_path / "data.jsonl"
        save_native(instances, path)
        assert [i.id for i in load_dataset(path, "native")] == [i.id for i in instances]

    def test_missing_correct_variant_names_line(self, tmp_path):
        good = ambiguous_instances(1)[0]
        bad = {
            "id": "u1",
            "language_pair": "en-it",
            "condition": UNAMBIGUOUS_INTRA,
            "source": "in her thirties she works",
            "variants": {"F": "una accademica", "M": "uno accademico"},
            "source_group": "F",
        }
        path = tmp_path / "data.jsonl"
        with open(path, "w") as fh:
            fh.write(json.dumps(instance_to_record(good)) + "\n")
            fh.write(json.dumps(bad) + "\n")
        with pytest.raises(DatasetError, match=r":2: missing field 'correct_variant'"):
            load_dataset(path, "native")

    def test_duplicate_id(self, tmp_path):
        instances = ambiguous_instances(1) * 2
        path = tmp_path / "data.jsonl"
        save_native(instances, path)
        with pytest.raises(DatasetError, match="duplicate id"):
            load_dataset(path, "native")

    def test_wrong_label_set(self, tmp_path):
        rec = {
            "id": "x1",
            "language_pair": "en-it",
            "condition": AMBIGUOUS_FM,
            "source": "s",
            "variants": {"N": "a", "G": "b"},
        }
        path = tmp_path / "data.jsonl"
        path.write_text(json.dumps(rec) + "\n")
        with pytest.raises(DatasetError, match="requires variant labels"):
            load_dataset(path, "native")

    def test_identical_variants_rejected(self, tmp_path):
        rec = {
            "id": "x1",
            "language_pair": "en-it",
            "condition": AMBIGUOUS_FM,
            "source": "s",
            "variants": {"F": "same", "M": "same"},
        }
        path = tmp_path / "data.jsonl"
        path.write_text(json.dumps(rec) + "\n")
        with pytest.raises(DatasetError, match="pairwise distinct"):
            load_dataset(path, "native")

    def test_extra_requires_context(self, tmp_path):
        rec = {
            "id": "x1",
            "language_pair": "en-it",
            "condition": "unambiguous_extra",
            "source": "s",
            "variants": {"F": "a", "M": "b"},
            "correct_variant": "F",
            "source_group": "F",
        }
        path = tmp_path / "data.jsonl"
        path.write_text(json.dumps(rec) + "\n")
        with pytest.raises(DatasetError, match="context"):
            load_dataset(path, "native")

    def test_unknown_schema(self, tmp_path):
        path = tmp_path / "data.jsonl"
        path.write_text("")
        with pytest.raises(DatasetError, match="unknown schema"):
            load_dataset(path, "tsv")


class TestCorpusAdapters:
    def test_mtgeneval_counterfactual(self, tmp_path):
        path = tmp_path / "mtg.tsv"
        path.write_text(
            "id\tlang\tsubset\tsource_f\tsource_m\tref_f\tref_m\textra\n"
            "g1\tit\tcounterfactual\tIn her thirties she works.\tIn his thirties he works.\t"
            "Trentenne, è un'accademica.\tTrentenne, è un accademico.\tnote\n"
        )
        instances = load_dataset(path, "mtgeneval")
        assert [i.id for i in instances] == ["g1.F", "g1.M"]
        assert all(i.condition == UNAMBIGUOUS_INTRA for i in instances)
        assert instances[0].correct_variant == "F"
        assert instances[1].correct_variant == "M"
        assert instances[0].variants == instances[1].variants
        assert instances[0].metadata == {"extra": "note"}

    def test_mtgeneval_contextual(self, tmp_path):
        path = tmp_path / "mtg.tsv"
        path.write_text(
            "id\tlang\tsubset\tcontext\tsource\tref_f\tref_m\tgold_gender\n"
            "c1\tit\tcontextual_amb\t\tThe academic works.\tL'accademica.\tL'accademico.\t\n"
            "c2\tit\tcontextual_disamb\tTymoshenko released her book.\tThe academic works.\t"
            "L'accademica.\tL'accademico.\tF\n"
        )
        amb, disamb = load_dataset(path, "mtgeneval")
        assert amb.condition == AMBIGUOUS_FM
        assert amb.correct_variant is None
        assert disamb.condition == "unambiguous_extra"
        assert disamb.context == "Tymoshenko released her book."
        assert disamb.source_group == "F"

    def test_gate(self, tmp_path):
        path = tmp_path / "gate.tsv"
        path.write_text(
            "id\tlang\tsource\ttranslation_f\ttranslation_m\n"
            "t1\tes\tThe lawyer arrived.\tLa abogada llegó.\tEl abogado llegó.\n"
        )
        (inst,) = load_dataset(path, "gate")
        assert inst.condition == AMBIGUOUS_FM
        assert inst.language_pair == LanguagePair("en", "es")
        assert set(inst.variants) == {"F", "M"}

    def test_mgente(self, tmp_path):
        path = tmp_path / "mgente.tsv"
        path.write_text(
            "id\tlang\tsource\ttranslation_neutral\ttranslation_gendered\n"
            "n1\tit\tThe chairperson spoke.\tLa persona alla presidenza ha parlato.\t"
            "Il presidente ha parlato.\n"
        )
        (inst,) = load_dataset(path, "mgente")
        assert inst.condition == AMBIGUOUS_NEUTRAL
        assert set(inst.variants) == {"N", "G"}

    def test_missing_column_names_line(self, tmp_path):
        path = tmp_path / "gate.tsv"
        path.write_text("id\tlang\tsource\ttranslation_f\n" "t1\tes\tsrc\tla\n")
        with pytest.raises(DatasetError, match=r":2: missing field 'translation_m'"):
            load_dataset(path, "gate")


class TestDiagnostics:
    def test_fixture_pairs_have_positive_ratio(self):
        for inst in ambiguous_instances(20) + unambiguous_instances(5, 5):
            a, b = inst.contrast_labels()
            diff = validate_minimal_edit(inst.variants[a], inst.variants[b])
            assert diff.diff_ratio > 0.0

    def test_flags_large_edits(self):
        inst = EvaluationInstance(
            id="big",
            language_pair=LanguagePair("en", "it"),
            source="src sentence",
            condition=AMBIGUOUS_FM,
            variants={"F": "a b c d", "M": "x y z w"},
        )
        diags = minimal_edit_diagnostics([inst])
        assert len(diags) == 1
        assert diags[0].kind == "not_minimal_edit"
        assert diags[0].instance_id == "big"

    def test_neutral_condition_exempt(self):
        inst = EvaluationInstance(
            id="neu",
            language_pair=LanguagePair("en", "it"),
            source="src sentence",
            condition=AMBIGUOUS_NEUTRAL,
            variants={"N": "a b c d", "G": "x y z w"},
        )
        assert minimal_edit_diagnostics([inst]) == []

    def test_minimal_pairs_not_flagged(self):
        assert minimal_edit_diagnostics(ambiguous_instances(10)) == []
