"""AntisymmetricRNN: recurrent networks built from stable ODE discretizations."""
