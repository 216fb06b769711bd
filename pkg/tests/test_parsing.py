"""Tests for the command-line value readers."""

import math

import pytest

from core.errors import ConfigError
from core.parsing import parse_complex, parse_float_list, parse_grid, parse_int_list


class TestComplex:
    @pytest.mark.parametrize("text,expected", [
        ("0.6,0.8", 0.6 + 0.8j),
        ("(0.6, 0.8)", 0.6 + 0.8j),
        ("0,1", 1j),
        ("-1/2,0", -0.5),
        ("3/5,-4/5", 0.6 - 0.8j),
        ("0.6+0.8j", 0.6 + 0.8j),
        ("0.8j", 0.8j),
        ("1", 1),
        ("1e-1,0", 0.1),
    ])
    def test_forms(self, text, expected):
        assert parse_complex(text) == pytest.approx(expected)

    def test_square_roots(self):
        assert parse_complex("sqrt(1/2),0") == pytest.approx(1 / math.sqrt(2))
        assert parse_complex("0,-sqrt(1/2)") == pytest.approx(-1j / math.sqrt(2))

    @pytest.mark.parametrize("text", ["", "   ", "abc", "1,2,3", "1/0,0"])
    def test_rejected(self, text):
        with pytest.raises(ConfigError):
            parse_complex(text)


class TestLists:
    def test_int_list(self):
        assert parse_int_list("3,4") == [3, 4]
        assert parse_int_list("2 3  4") == [2, 3, 4]

    @pytest.mark.parametrize("text", ["", "3,x", "2.5"])
    def test_bad_int_list(self, text):
        with pytest.raises(ConfigError):
            parse_int_list(text)

    def test_grid_is_inclusive(self):
        grid = parse_grid("0.01:0.99:0.01")
        assert len(grid) == 99
        assert grid[0] == 0.01
        assert grid[-1] == 0.99
        assert grid[49] == 0.5

    def test_grid_stops_before_overshoot(self):
        assert parse_grid("0:1:0.3") == [0.0, 0.3, 0.6, 0.9]

    @pytest.mark.parametrize("text", ["0:1", "0:1:0", "1:0:0.1", "a:b:c"])
    def test_bad_grid(self, text):
        with pytest.raises(ConfigError):
            parse_grid(text)

    def test_float_list_mixes_values_and_grids(self):
        assert parse_float_list("0.1:0.3:0.1,0.75") == [0.1, 0.2, 0.3, 0.75]
        assert parse_float_list("0.2,0.6,0.8") == [0.2, 0.6, 0.8]

    def test_empty_float_list(self):
        with pytest.raises(ConfigError):
            parse_float_list(" ")
