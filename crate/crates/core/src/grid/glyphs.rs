//! Fixed glyph atlas: twenty single-component shapes drawn on a 12x12 canvas.
//!
//! Every glyph is one 8-connected blob so connected-component splitting yields
//! exactly one component per shape. Glyphs are inset by two pixels inside a
//! 16x16 cell, which keeps shapes in neighbouring cells from touching.

pub const GLYPH_SIZE: usize = 12;

pub(crate) const GLYPH_NAMES: [&str; 20] = [
    "square", "triangle", "circle", "delta", "diamond", "plus", "cross", "ring", "hexagon",
    "star", "a", "c", "e", "f", "h", "k", "l", "t", "u", "z",
];

#[rustfmt::skip]
pub(crate) const GLYPH_ART: [[&str; GLYPH_SIZE]; 20] = [
    // square
    ["............",
     ".##########.",
     ".##########.",
     ".##########.",
     ".##########.",
     ".##########.",
     ".##########.",
     ".##########.",
     ".##########.",
     ".##########.",
     ".##########.",
     "............"],
    // triangle (filled)
    ["............",
     ".....##.....",
     ".....##.....",
     "....####....",
     "....####....",
     "...######...",
     "...######...",
     "..########..",
     "..########..",
     ".##########.",
     ".##########.",
     "............"],
    // circle (filled)
    ["............",
     "....####....",
     "..########..",
     "..########..",
     ".##########.",
     ".##########.",
     ".##########.",
     ".##########.",
     "..########..",
     "..########..",
     "....####....",
     "............"],
    // delta (outlined triangle)
    ["............",
     ".....##.....",
     ".....##.....",
     "....#..#....",
     "....#..#....",
     "...#....#...",
     "...#....#...",
     "..#......#..",
     "..#......#..",
     ".##########.",
     ".##########.",
     "............"],
    // diamond
    ["............",
     ".....##.....",
     "....####....",
     "...######...",
     "..########..",
     ".##########.",
     ".##########.",
     "..########..",
     "...######...",
     "....####....",
     ".....##.....",
     "............"],
    // plus
    ["............",
     ".....##.....",
     ".....##.....",
     ".....##.....",
     ".....##.....",
     ".##########.",
     ".##########.",
     ".....##.....",
     ".....##.....",
     ".....##.....",
     ".....##.....",
     "............"],
    // cross
    ["............",
     ".##......##.",
     "..##....##..",
     "...##..##...",
     "....####....",
     ".....##.....",
     "....####....",
     "...##..##...",
     "..##....##..",
     ".##......##.",
     "............",
     "............"],
    // ring
    ["............",
     "....####....",
     "..##....##..",
     "..#......#..",
     ".#........#.",
     ".#........#.",
     ".#........#.",
     ".#........#.",
     "..#......#..",
     "..##....##..",
     "....####....",
     "............"],
    // hexagon
    ["............",
     "...######...",
     "..########..",
     ".##########.",
     ".##########.",
     ".##########.",
     ".##########.",
     ".##########.",
     ".##########.",
     "..########..",
     "...######...",
     "............"],
    // star
    ["............",
     ".....##.....",
     ".....##.....",
     "....####....",
     "############",
     ".##########.",
     "...######...",
     "...######...",
     "..###..###..",
     "..##....##..",
     ".##......##.",
     "............"],
    // a
    ["............",
     "....####....",
     "...##..##...",
     "..##....##..",
     "..##....##..",
     "..########..",
     "..########..",
     "..##....##..",
     "..##....##..",
     "..##....##..",
     "..##....##..",
     "............"],
    // c
    ["............",
     "...#######..",
     "..########..",
     "..##........",
     "..##........",
     "..##........",
     "..##........",
     "..##........",
     "..##........",
     "..########..",
     "...#######..",
     "............"],
    // e
    ["............",
     "..########..",
     "..########..",
     "..##........",
     "..##........",
     "..######....",
     "..######....",
     "..##........",
     "..##........",
     "..########..",
     "..########..",
     "............"],
    // f
    ["............",
     "..########..",
     "..########..",
     "..##........",
     "..##........",
     "..######....",
     "..######....",
     "..##........",
     "..##........",
     "..##........",
     "..##........",
     "............"],
    // h
    ["............",
     "..##....##..",
     "..##....##..",
     "..##....##..",
     "..##....##..",
     "..########..",
     "..########..",
     "..##....##..",
     "..##....##..",
     "..##....##..",
     "..##....##..",
     "............"],
    // k
    ["............",
     "..##....##..",
     "..##...##...",
     "..##..##....",
     "..##.##.....",
     "..####......",
     "..####......",
     "..##.##.....",
     "..##..##....",
     "..##...##...",
     "..##....##..",
     "............"],
    // l
    ["............",
     "..##........",
     "..##........",
     "..##........",
     "..##........",
     "..##........",
     "..##........",
     "..##........",
     "..##........",
     "..########..",
     "..########..",
     "............"],
    // t
    ["............",
     ".##########.",
     ".##########.",
     ".....##.....",
     ".....##.....",
     ".....##.....",
     ".....##.....",
     ".....##.....",
     ".....##.....",
     ".....##.....",
     ".....##.....",
     "............"],
    // u
    ["............",
     "..##....##..",
     "..##....##..",
     "..##....##..",
     "..##....##..",
     "..##....##..",
     "..##....##..",
     "..##....##..",
     "..##....##..",
     "..########..",
     "...######...",
     "............"],
    // z
    ["............",
     "..########..",
     "..########..",
     "........##..",
     ".......##...",
     "......##....",
     ".....##.....",
     "....##......",
     "...##.......",
     "..########..",
     "..########..",
     "............"],
];
