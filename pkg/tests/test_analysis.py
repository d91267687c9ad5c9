from sciret.analysis import Analyzer, load_stopwords, remove_stopwords, tokenize


def test_tokenize_splits_and_folds():
    assert tokenize("SARS-CoV-2 spread!") == ["sars", "cov", "2", "spread"]
    assert tokenize("") == []
    assert tokenize("Coronavirus coronavirus") == ["coronavirus", "coronavirus"]


def test_tokenize_discards_punctuation():
    assert tokenize("don't; stop...") == ["don", "t", "stop"]


def test_remove_stopwords():
    assert remove_stopwords(["the", "virus"]) == ["virus"]
    assert remove_stopwords(["virus"]) == ["virus"]
    assert remove_stopwords([]) == []


def test_stopword_override(tmp_path):
    path = tmp_path / "stop.txt"
    path.write_text("virus\n")
    stops = load_stopwords(path)
    assert remove_stopwords(["the", "virus"], stops) == ["the"]


def test_analyzer_positions_are_post_stopword_ordinals():
    terms = Analyzer().analyze_terms("the virus spreads in the cities")
    assert [t.position for t in terms] == list(range(len(terms)))
    assert [t.source_token for t in terms] == ["virus", "spreads", "cities"]
    assert [t.stem for t in terms] == ["viru", "spread", "citi"]


def test_analysis_is_pure():
    a = Analyzer()
    text = "Coronavirus response to weather changes"
    assert a.analyze(text) == a.analyze(text) == Analyzer().analyze(text)
