from hypothesis import given, strategies as st

from dynawarp.tokenizer import (KIND_ALNUM, KIND_NON_ASCII, KIND_OTHER_ASCII,
                                ascii_lower, ascii_lower_bytes, contains_grams,
                                split_runs, tokenize, top_level_tokens)


def test_alphanumeric_word_and_its_trigrams():
    assert tokenize("warning") == {"warning", "war", "arn", "rni", "nin", "ing"}


def test_short_alphanumeric_runs_have_no_trigrams():
    assert tokenize("ab") == {"ab"}
    assert tokenize("abc") == {"abc"}


def test_dotted_composites():
    tokens = tokenize("192.0.0")
    assert {"192.0.0", "192.0", "0.0", "192", "0", "."} <= tokens


def test_separator_composites():
    tokens = top_level_tokens("name@company")
    assert {"name@company", "name", "company", "@"} <= tokens
    full = tokenize("name@company")
    assert {"nam", "ame", "com", "omp", "pan", "any"} <= full


def test_all_separator_characters_compose():
    for sep in ".:_-/@":
        assert f"a{sep}b" in tokenize(f"a{sep}b")
    # Multi-character separators do not compose.
    assert "a..b" not in tokenize("a..b")
    # Non-separator punctuation does not compose.
    assert "a,b" not in tokenize("a,b")


def test_punctuation_run_grams():
    tokens = tokenize("${}")
    assert {"${}", "$", "{", "}", "${", "{}"} <= tokens


def test_non_ascii_runs_use_bigrams_of_scalars():
    tokens = tokenize("日本語")
    assert {"日本語", "日本", "本語"} <= tokens
    assert "日" not in tokens  # 1-grams only for punctuation runs


def test_ascii_case_folding_only():
    assert tokenize("ERROR") == tokenize("error")
    assert "Σ".lower() not in tokenize("Σ") or "σ" not in tokenize("Σ")
    assert ascii_lower("ÄBc") == "Äbc"
    assert ascii_lower_bytes(b"ABC\xc3\x84") == b"abc\xc3\x84"


def test_empty_line_yields_no_tokens():
    assert tokenize("") == set()
    assert tokenize(b"") == set()


def test_split_runs_classes():
    runs = split_runs("ab1.-日本x")
    assert runs == [(KIND_ALNUM, "ab1"), (KIND_OTHER_ASCII, ".-"),
                    (KIND_NON_ASCII, "日本"), (KIND_ALNUM, "x")]


def test_top_level_excludes_grams():
    top = top_level_tokens("warning signs")
    assert top == {"warning", "signs", " "}


def test_invalid_utf8_is_tolerated():
    tokens = tokenize(b"abc \xff\xfe def")
    assert {"abc", "def"} <= tokens


# -- substring query planning -----------------------------------------------------


def test_plan_grams_for_injection_needle():
    assert contains_grams("${jndi") == sorted({"$", "{", "${", "jnd", "ndi"})


def test_plan_grams_skip_boundary_spans():
    grams = contains_grams("ab-cd")
    assert "-" in grams
    assert "b-c" not in grams and "ab-" not in grams


def test_short_alnum_needle_has_no_grams():
    assert contains_grams("ab") == []


def test_sixteen_letter_id_has_fourteen_trigrams():
    needle = "lamhmiagiialitj" + "q"
    grams = contains_grams(needle)
    assert len(grams) == len({needle[i:i + 3] for i in range(14)})
    assert all(len(g) == 3 for g in grams)


@given(st.text(alphabet=st.sampled_from("abXY01 .-${}日本"), min_size=1,
               max_size=60),
       st.data())
def test_plan_grams_are_always_indexed_in_matching_lines(line, data):
    lowered = ascii_lower(line)
    start = data.draw(st.integers(0, len(lowered) - 1))
    stop = data.draw(st.integers(start + 1, len(lowered)))
    needle = lowered[start:stop]
    tokens = tokenize(line)
    for gram in contains_grams(needle):
        assert gram in tokens
