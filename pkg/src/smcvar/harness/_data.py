"""Frozen observation sequences of the bundled demo models.

Regenerate with the model simulators and the seeds noted on
each entry; frozen literals keep every experiment byte-stable
across library versions.
"""

# two-state chain, simulator stream (2024, 1)
TWO_STATE_OBS = "11111011111011111101"

# three-state contractive chain, simulator stream (777, 1)
THREE_STATE_OBS = (
    "11011111010111110000101010011000000011011001010001001011011001011001"
    "10111111001000100011000101011001001110000000100101000101011101111110"
    "1100110101010001001011000101011110011111010100110011110001011101"
)

# Bernoulli(1/sqrt(3)) draws, simulator stream (99, 3)
BETA_OBS = (
    "11100110111111011011101001101101000011010110001011000000000011110110"
    "11111011110101100111000110110000111010110110101111101111110100011101"
    "01101111011111101111100111001111010101000111001111000101001001101100"
    "11011001101011000011010100111011101111111011001011110000011101111010"
    "11110101101011100100011011110111001000111100111101000011110111110011"
    "10111000100110001110011100111010110101100101011011000110000011101111"
    "00011000111110101101010000011110100011000111010101011011011110111110"
    "11111011001010000110001001110111011100111110010111000000101101010000"
    "11111011011011111011011111011110111101101111011111100110010011111111"
    "00011010101110111001101110101011110111101110110011000000101110101100"
    "11010100011111101111100111011111100010101110101001110101111001010111"
    "01101110101011110001111010011111110010101011110101111001010111101111"
    "00011111010111000100110111000011100101111000110101001011111100011111"
    "10111001100111111111010011110011111011110111111100101111100100110110"
    "11011111111011101110001011001111000100111101100101000001111011010011"
    "01101111100100111110101110010011010001011000100101001101011110101101"
    "01101001100101111001110110010001010001101001001010111111010101010110"
    "01011110111111100101001101001111000100010111101111100110101101000101"
    "10010111000111011101110110101010011101001101011010011011010011001100"
    "01111000010110001011000101000101110111111010111111110101100111011011"
    "11001111001001010111110101100111111111000000111011111110011000101111"
    "11100011000011110101110111011010001000101101011100110010110100101111"
    "11011011000111010111111111111010001001111001111000111101010011001000"
    "11100000100001110111110100111011110010111000011101110001010001111111"
    "00011110101011000001111010111100100011110100011111100110001101011011"
    "01011111111101001001000001011111101100100010110111001011101111001101"
    "00110011010111110010110111000100111111011000011111111110010100110010"
    "01111001010110101011011111001010111001101001110111101011001111001110"
    "00110110011000010101100111111110101010000111101110010100111110001010"
    "11110111110001000001011001110100111111110111111010110011111001101110"
    "00101111111101010100001100111111111110010010100010111100111111011000"
    "01001000000001111010000010110000111110111000000100011001011000011010"
    "01111101111010011000000100111110011010110001110000011000111011101111"
    "01100000111110100010100000010111011011010100011001101111111001001101"
    "10010101101011111101110001011110110011010111011011011010100100001110"
    "11011010010100111111111101011101011101000101011001111110111010010110"
    "10101100110011101010111001110000011110011010101110100101000100110110"
    "10101101011110000010101000001100011000100101011111101010111101111011"
    "11111101010111110111011100111111010011100000001111011110011111011110"
    "11100110010010010111100011100011111011110011100011011010111110011000"
    "11110101100111111011101111000100111001111011011101011011101001001000"
    "00111101000110000110111110101101000011101011011011010111000001011000"
    "00111001100100100101011101000011100010011001001110110000111110011111"
    "11101101100111000110001011110101001111101001001001111010001110000001"
    "11011111101111001001000111111001101000110110111110111000111101111100"
    "10010101011010110011100110100011000111111111111010000101001101100010"
    "11100101111011111011110010001001001101011101000100011110011011111101"
    "01011011000000110110111011111111011100001100101011001110111101100110"
    "00001101111010011110111001111101111100000111011011110010111011011101"
    "11000110111101000010111110111001111010111000111111010101100111001001"
    "01011110111111101110011111111001101111101111110011110111110010110100"
    "11010100101111111111101001100011110111101010100011101010111111000111"
    "01010111110101111101111011100000110001100101111100001111100101111110"
    "10101001110110110100111001001010111011110110011111100110001110110111"
    "11110010001010000010111001110110010111100111001100010100100011011011"
    "11100111111000111000110011111111110011111110001110011111111110111011"
    "01101010110101100111010100100011110101010100001101110111001110001000"
    "01000010111101000111110011100101111101011110110100011011011101111011"
    "11011111000111101010100110011000110111001101110011111011010110011101"
    "00110111000011000010111100011111101100110110100011100000100100011110"
    "11111001011101111101111110011011101110111111110010001101111111011000"
    "10111000111001111111101110001001011000101101000000101100110010111111"
    "00011011010001101010111101011111111110001111000110111100110111010010"
    "00111001000010110001010100101011111011011110001111011111111110110011"
    "00010011010110100101011110001001000010110000000111101100111011001110"
    "11000101000110111110011101000000111000011101001111111111111100001011"
    "10011001010111011001001001001101011101110011010111110000000101111011"
    "11101110010010011111110000011000111000101011111111101111001110100110"
    "01111011110111010010001101101100101111010101100111111111111111010110"
    "00010110110000001101001010100100010100110011010001100100100001101011"
    "10101001101111111111010101100011111110011111011010101111111010101111"
    "00110101010010101111110110011000001100111111011010001011110011111011"
    "00111110011010101000111101101100111011101011011100000100101111110010"
    "11010111101100011011110101111111111111011010111101010011001111011111"
    "11001110100110110100111010001101011011110001100110001101111010000101"
    "10101100110100111010000011101010011111011011110111001011010000011110"
    "01011101000101101001000111111111111111100101111101111111110110010101"
    "10000011111111101100110110111011000110011111010111110011011111101110"
    "11101111011011111011111111111001110111111011000011011000000010101001"
    "10111001101000011001111001110010101100111101011000011111110111101010"
    "00011011110111101001111011011010011010110101011111000111110111111011"
    "00000011001101101101001101111010110001011010001001011000111100011011"
    "10001110000011111101110111101010001001001010010100110101011011101101"
    "00010110100110110101111001100011110100110010010111111111101100010111"
    "00000111011101101011110010000110100000110110101101011101001111101111"
    "11101011111100010111110110101101011110000101000100010001110111101001"
    "11100101000110100010101100100000011011100111011000011010111011001111"
    "01001001111010001000111101010001100110111111111100000111110011110110"
    "01100100011000010101011100111101100110011010011010111011010110001110"
    "10101000110000010001000000001101101100100111111011110110101100101100"
    "01111111010010001010110001001101111000001011011001100101110010100111"
    "11110001111100111111000101110111000110001101111010111011111000101111"
    "11001110011111001011111110010101100101011001011011011111010101000111"
    "11111010101110110011110011101010011111110110101111100111010001001000"
    "01010011111011011011100000000100111100001111001111111101101100000110"
    "10001111010110111100011111101001010101110011101100011111111011110111"
    "10011010010101000001001111110000111110101111101111011101001100111001"
    "10010110110111010111001110100101111001011101111011111111011100011001"
    "01001111001011100111100111010100111111111000010001000011111111010110"
    "10110101001101100011100101111000110100001000100110111001011111110101"
    "11111101111011111111011101110111111100010101010011111101101011000010"
    "11111111100000111100101111101100011000000100001101101111100110010000"
    "11110011001111011101111101101111100111010111110110000011110000011111"
    "11100101111010011010000111011111011101110001111111101101110010001101"
    "10001001101111001011010001010101110111001111011010000111001001010110"
    "00011110000010011110011001011011111011100011010001100000010010100011"
    "11100111001101010010001110011111111011101001100111010111101111111101"
    "11000110111100111110101111010111001110000101101011110011010100101110"
    "11000010100001110011101111001101011110010100101011110011000100110001"
    "01111101101101010001010111110011100011101110110101100100010011011111"
    "01111101110000011010111001010111110000100000001011001011011111111000"
    "01100110011000001010111111111011111110101000000000101010110111001010"
    "10111101101011111010111101100110100111011010110101011110000001110111"
    "01111011100000111010110111100010111010001011011110001101111000111101"
    "11010001111100101111101000011011110011011110011110001001001011111110"
    "10110101000010001010001101110110010110010101001101001100101100101011"
    "00010001111000011110110000010110111111001010100011110001011100110010"
    "11001011110011110011010001011010110110111100110101000101101111111011"
    "01111011101111011111011100111001111000110111000000111010111000011111"
    "11011010010111110111111100001111100111100000101001010001001110110100"
    "01101000110101100001101100101000111111011011011010001111110101100101"
    "01001111001100111011111101110100000010011111101111010100010101001111"
    "01011011101001101110011001110110011010101011011001100010110111001111"
    "10010011001011001100111111011001011111101111111010001111110011001001"
    "01001000010111101110011001010100111111001100101000010010001000111010"
    "11111110001001110010010101100001000010001010101111000101100110110110"
    "01101100111101111101110100100111000011100000011001011101111110010101"
    "00100001111010111011111011100001101001001100101111110010110000010110"
    "10110010110011001011101101110110001101001010101111100001111001001110"
    "00010100011100011001101110111001001110110000110111110100101010101110"
    "11010011101001111110000111001011001111100110110101100011101010011111"
    "11110100011010001101010101100110001010010011111111101010011101011001"
    "10101101011100100010111101101010100001110000011111111000111000000101"
    "01001001111101010010011001011010111011110111111010101111111111110110"
    "10011000000000010001100100010001011110111111110001101111110010001110"
    "01010101100111001100101101001000101111111011110101100111110011011110"
    "00111110100101011110111111111011111000111011001110111111110010111101"
    "01010101011011111001111111001010001001000110111101111001001100111100"
    "00110111001111000011111011111101110011110001110101110110111111000110"
    "01000111101101011101111011001110010100001010000001111111100111010011"
    "10000111011111101010101011100011011000111100110110001001111000101100"
    "10110010110010111111100110111111100110010011011001000110101110000011"
    "11101011110111101110110100110111101000001001110000000111110100000100"
    "01101110000011111001111011100001100001000001111100101101101011100111"
    "00110110010000101100101011101111101100010101101000111100111011111100"
    "11111101101110011111111111011111101011001010000101110011000110110001"
    "10011011101001000011101001101111010101011101111001111111110011111101"
    "0001"
)

# AR(1)+noise draws, simulator stream (314, 1)
LGSSM_OBS = [
    1.8471800909, -0.963185338, -1.0848214366, -0.7748447675,
    -0.4090214359, 1.4171474488, -0.0581173285, -3.6027100433,
    -2.4752727305, -2.6663635265, -3.299691299, -0.1776896766,
    -0.2187483384, 0.3821779939, -1.2424638482, 1.4741920399,
    2.8810554429, 2.1882480665, 3.6780977417, 1.1426629033,
]
