import pytest

# SSKJ-lite rendering of the dictionary's "slovar" entry: two senses, core
# snippets with "/" groups, and tagged special-example sections.
SLOVAR_ENTRY = """\
slovar
1. knjiga, v kateri so besede razvrščene po abecedi in pojasnjene: slovar ima sto tisoč besed; izdati, sestavljati slovar; prevajati s slovarji; obsežen slovar / na koncu knjige je slovar seznam s tako razvrščenimi in pojasnjenimi besedami / enojezični, narečni, pravopisni, tehniški slovar
* jezikosl. avtorski slovar ki vsebuje besede določenega avtorja; etimološki, frekvenčni, informativno-normativni slovar; obrnjeni slovar
2. besedni zaklad: imeti bogat slovar / njen slovar ni bil ravno izbran
** ekspr. besede nemogoče ni v njegovem slovarju odločen je narediti tudi na videz nemogoče stvari; ekspr. če to povemo v ekonomskem slovarju
"""


@pytest.fixture
def slovar_text():
    return SLOVAR_ENTRY


@pytest.fixture
def slovar_file(tmp_path):
    path = tmp_path / "slovar.txt"
    path.write_text(SLOVAR_ENTRY, encoding="utf-8")
    return path
