# Operations package

