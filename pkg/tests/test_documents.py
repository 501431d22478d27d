import unicodedata

from refinery.documents import Document, document_id, make_document


def test_id_is_pure_function_of_url_date_text():
    a = document_id("http://x", 100, "hello")
    b = document_id("http://x", 100, "hello")
    c = document_id("http://x", 101, "hello")
    assert a == b
    assert a != c
    assert len(a) == 32  # 128 bits as hex


def test_make_document_normalizes_nfc_and_strips_nul():
    decomposed = "näive"  # a + combining diaeresis
    doc = make_document(decomposed + "\x00tail")
    assert doc.text == unicodedata.normalize("NFC", decomposed) + "tail"
    assert "\x00" not in doc.text


def test_und_iff_zero_confidence():
    assert make_document("x", lang="hi", lang_confidence=0.0).lang == "und"
    assert make_document("x", lang="und", lang_confidence=0.9).lang_confidence == 0.0
    doc = make_document("x", lang="hi", lang_confidence=0.5)
    assert (doc.lang == "und") == (doc.lang_confidence == 0)


def test_json_round_trip():
    doc = make_document("अआ इ", url="http://a", fetched_at=7, lang="hi", lang_confidence=0.5)
    again = Document.from_json(doc.to_json())
    assert again == doc
